//! A trained bank plus combiner, as produced for one training part.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{augment_rows, AugmentConfig};
use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::label::Class;
use crate::rng::derive_seed;
use crate::stage1::{attach_label, split_validation, train_bank, LabeledFeatures, OvrBank, StageOneConfig};
use crate::stage2::{train_combiner, Combiner, CombinerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stage1: StageOneConfig,
    pub stage2: CombinerConfig,
    /// Synthetic second-stage rows; used only by trained combiners.
    pub augmentation: Option<AugmentConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stage1: StageOneConfig::default(),
            stage2: CombinerConfig::default(),
            augmentation: Some(AugmentConfig::default()),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage2.validate()?;
        if let Some(a) = &self.augmentation {
            a.validate()?;
        }
        Ok(())
    }
}

/// Epoch counts of one bank member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub member: String,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub seed: u64,
    pub fit_size: usize,
    pub validation_size: usize,
    /// Rows the combiner was trained on, generated ones included; 0 for the
    /// fixed rule.
    pub stage_two_rows: usize,
    pub members: Vec<MemberSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub bank: OvrBank,
    pub combiner: Combiner,
}

pub const BANK_DIR: &str = "bank";
pub const COMBINER_FILE: &str = "combiner.json";

impl Pipeline {
    pub fn predict_corpus(&self, corpus: &LabeledCorpus) -> Result<Vec<Class>> {
        self.combiner.predict_all(&self.bank.predict_corpus(corpus)?)
    }

    pub fn predict_text(&self, text: &str) -> Result<Class> {
        self.combiner.predict(&self.bank.predict_text(text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.bank.save(&dir.join(BANK_DIR))?;
        self.combiner.save(&dir.join(COMBINER_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let bank = OvrBank::load(&dir.join(BANK_DIR))?;
        let combiner = Combiner::load(&dir.join(COMBINER_FILE))?;
        if combiner.width != bank.feature_width() {
            return Err(Error::WidthMismatch {
                expected: bank.feature_width(),
                actual: combiner.width,
            });
        }
        Ok(Pipeline { bank, combiner })
    }
}

/// Holds out a stratified validation part of `corpus`, trains the bank on
/// the rest, then trains the combiner on the bank's outputs for the
/// validation part (plus generated rows when configured).
pub fn train_pipeline(corpus: &LabeledCorpus, config: &PipelineConfig, seed: u64) -> Result<(Pipeline, TrainingSummary)> {
    config.validate()?;
    let (fit, validation) = split_validation(corpus, config.stage1.validation_fraction, derive_seed(seed, 0))?;
    let bank = train_bank(&fit, &validation, &config.stage1, derive_seed(seed, 1))?;
    let width = bank.feature_width();

    let mut stage_two_rows = 0;
    let combiner = if config.stage2.kind.is_trained() {
        let features = bank.predict_corpus(&validation)?;
        let mut rows: Vec<LabeledFeatures> = features
            .iter()
            .zip(validation.iter())
            .map(|(f, s)| attach_label(f, s.label.ok_or_else(|| Error::Input(format!("sample '{}' has no label", s.id)))?))
            .collect::<Result<_>>()?;
        if let Some(a) = &config.augmentation {
            let a = AugmentConfig {
                seed: derive_seed(seed, 2),
                ..a.clone()
            };
            let generated = augment_rows(&rows, &a)?;
            rows.extend(generated);
        }
        stage_two_rows = rows.len();
        train_combiner(&rows, width, &config.stage2, derive_seed(seed, 3))?
    } else {
        Combiner::fixed(width)?
    };

    let members = bank
        .members()
        .iter()
        .map(|m| MemberSummary {
            member: m.member.name(),
            epochs_run: m.classifier.report.epochs_run,
            best_epoch: m.classifier.report.best_epoch,
        })
        .collect();
    let summary = TrainingSummary {
        seed,
        fit_size: fit.len(),
        validation_size: validation.len(),
        stage_two_rows,
        members,
    };
    Ok((Pipeline { bank, combiner }, summary))
}
