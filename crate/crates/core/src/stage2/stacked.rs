//! Stacked ensemble of identical recurrent models over quantized feature
//! rows, combined by majority vote.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed::argmax_class;
use crate::augment::quantize;
use crate::error::{Error, Result};
use crate::label::Class;
use crate::neural::{
    train, CellActivation, Example, SequenceClassifier, SequenceClassifierConfig, TrainedClassifier, TrainingSchedule,
    SECOND_STAGE_BATCH,
};
use crate::rng::derive_seed;
use crate::stage1::{LabeledFeatures, StageOneFeatures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackedConfig {
    /// Ensemble size.
    pub instances: usize,
    /// Decimal digits kept per probability.
    pub significance: u32,
    pub embedding_dim: usize,
    pub recurrent_units: usize,
    pub cell_activation: CellActivation,
    pub schedule: TrainingSchedule,
    /// Share of rows held out for checkpoint selection.
    pub validation_fraction: f64,
}

impl Default for StackedConfig {
    fn default() -> Self {
        let net = SequenceClassifierConfig::second_stage(1, 1);
        StackedConfig {
            instances: 5,
            significance: 2,
            embedding_dim: net.embedding_dim,
            recurrent_units: net.recurrent_units,
            cell_activation: net.cell_activation,
            schedule: TrainingSchedule::new(0.08, 0.15).with_batch_size(SECOND_STAGE_BATCH),
            validation_fraction: 0.1,
        }
    }
}

impl StackedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Config("stacked.instances: must be at least 1".into()));
        }
        if !(1..=6).contains(&self.significance) {
            return Err(Error::Config("stacked.significance: must lie in 1..=6".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("stacked.validation_fraction: must lie in (0, 1)".into()));
        }
        self.schedule.validate()
    }

    /// Input vocabulary `width * 10^m` for rows of `width` components.
    pub fn vocabulary_size(&self, width: usize) -> usize {
        width * 10usize.pow(self.significance)
    }
}

/// Token `i * 10^m + quantize(v_i, m)` for each component `i`, so every
/// component occupies its own band of the input vocabulary.
pub fn encode_row(features: &StageOneFeatures, significance: u32) -> Vec<u32> {
    let band = 10u32.pow(significance);
    features
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| i as u32 * band + quantize(v, significance))
        .collect()
}

/// Majority vote over per-instance class distributions: each instance
/// votes for its argmax; ties in vote count are broken by summed
/// probabilities, then by class order.
pub fn stacked_vote(outputs: &[[f64; 3]]) -> Class {
    let mut votes = [0usize; 3];
    for o in outputs {
        votes[argmax_class(*o).index()] += 1;
    }
    let top = *votes.iter().max().unwrap_or(&0);
    let mut sums = [f64::NEG_INFINITY; 3];
    for k in 0..3 {
        if votes[k] == top {
            // Summed in sorted order so the result does not depend on
            // instance order.
            let mut col: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
            col.sort_by(f64::total_cmp);
            sums[k] = col.iter().sum();
        }
    }
    argmax_class(sums)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedEnsemble {
    pub significance: u32,
    pub width: usize,
    pub members: Vec<TrainedClassifier>,
}

impl StackedEnsemble {
    pub fn instance_outputs(&self, features: &StageOneFeatures) -> Result<Vec<[f64; 3]>> {
        if features.width() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                actual: features.width(),
            });
        }
        let tokens = encode_row(features, self.significance);
        self.members
            .iter()
            .map(|m| {
                let p = m.model.forward(&tokens)?;
                Ok([p[0], p[1], p[2]])
            })
            .collect()
    }

    pub fn predict(&self, features: &StageOneFeatures) -> Result<Class> {
        Ok(stacked_vote(&self.instance_outputs(features)?))
    }
}

/// Trains `config.instances` models on the same rows, differing only in
/// seed. A stratified share of the rows is held out to select checkpoints.
pub fn train_stacked(rows: &[LabeledFeatures], config: &StackedConfig, seed: u64) -> Result<StackedEnsemble> {
    config.validate()?;
    let width = rows.first().ok_or_else(|| Error::Input("no rows to train on".into()))?.features.width();
    if let Some(r) = rows.iter().find(|r| r.features.width() != width) {
        return Err(Error::WidthMismatch {
            expected: width,
            actual: r.features.width(),
        });
    }
    let examples: Vec<Example> = rows
        .iter()
        .map(|r| Example::new(encode_row(&r.features, config.significance), r.label.index()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let mut held = vec![false; rows.len()];
    for class in Class::ALL {
        let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label == class).collect();
        idx.shuffle(&mut rng);
        let take = ((config.validation_fraction * idx.len() as f64).round() as usize).max(1).min(idx.len().saturating_sub(1));
        for &i in &idx[..take] {
            held[i] = true;
        }
    }
    let (mut fit, mut validation) = (Vec::new(), Vec::new());
    for (ex, &h) in examples.into_iter().zip(&held) {
        if h {
            validation.push(ex);
        } else {
            fit.push(ex);
        }
    }
    if fit.is_empty() || validation.is_empty() {
        return Err(Error::Input("too few rows to hold out a validation part".into()));
    }

    let net = SequenceClassifierConfig {
        vocab_size: config.vocabulary_size(width),
        sequence_length: width,
        embedding_dim: config.embedding_dim,
        recurrent_units: config.recurrent_units,
        dense_units: None,
        output_classes: 3,
        cell_activation: config.cell_activation,
    };
    let members = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let model = SequenceClassifier::new(net.clone(), derive_seed(seed, 2 * i as u64))?;
            train(model, &fit, &validation, &config.schedule, derive_seed(seed, 2 * i as u64 + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StackedEnsemble {
        significance: config.significance,
        width,
        members,
    })
}
