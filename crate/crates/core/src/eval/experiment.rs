//! Repeated k-fold cross-validation over the full pipeline.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kfold::{kfold, DEFAULT_FOLDS};
use super::metrics::{metrics, ConfusionMatrix, MetricsReport};
use super::pipeline::{train_pipeline, PipelineConfig, TrainingSummary};
use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::label::{Class, Label, LabelSpace};
use crate::rng::derive_seed;
use crate::stage2::GridScore;

pub const DEFAULT_REPETITIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: DEFAULT_FOLDS,
            repetitions: DEFAULT_REPETITIONS,
            seed: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("folds: need at least 2".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions: need at least 1".into()));
        }
        self.pipeline.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub repetition: usize,
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub training: TrainingSummary,
    pub selection: Vec<GridScore>,
    pub metrics: MetricsReport,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// The standard deviation is 0 for fewer than two values.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: String,
    pub precision: Stat,
    pub recall: Stat,
    pub f_score: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub classes: Vec<ClassSummary>,
    /// Mean of the per-fold totals.
    pub total_f: Stat,
    pub accuracy: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub samples: usize,
    pub folds: Vec<FoldReport>,
    pub summary: ExperimentSummary,
}

/// Averages every per-class metric and the totals over `reports`, which
/// must share one label set.
pub fn summarize(reports: &[&MetricsReport]) -> ExperimentSummary {
    let labels: Vec<String> = reports
        .first()
        .map(|r| r.classes.iter().map(|c| c.label.clone()).collect())
        .unwrap_or_default();
    let column = |f: &dyn Fn(&MetricsReport) -> f64| Stat::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    let classes = labels
        .iter()
        .enumerate()
        .map(|(k, label)| ClassSummary {
            label: label.clone(),
            precision: column(&|r| r.classes[k].precision),
            recall: column(&|r| r.classes[k].recall),
            f_score: column(&|r| r.classes[k].f_score),
        })
        .collect();
    ExperimentSummary {
        classes,
        total_f: column(&|r| r.total_f),
        accuracy: column(&|r| r.accuracy),
    }
}

/// Three-class confusion matrix in tie-breaking class order.
pub fn class_matrix(gold: &[Class], predicted: &[Class]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_pairs(
        Class::ALL.map(Class::as_str),
        gold.iter().zip(predicted).map(|(g, p)| (g.index(), p.index())),
    )
}

fn gold_classes(corpus: &LabeledCorpus) -> Result<Vec<Class>> {
    corpus
        .iter()
        .map(|s| match s.label {
            Some(Label::Class(c)) => Ok(c),
            _ => Err(Error::Input(format!("sample '{}' lacks a three-class label", s.id))),
        })
        .collect()
}

fn run_fold(
    corpus: &LabeledCorpus,
    train_positions: &[usize],
    test_positions: &[usize],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(usize, TrainingSummary, Vec<GridScore>, MetricsReport)> {
    let train = corpus.select(train_positions);
    let test = corpus.select(test_positions);
    let train_ids: HashSet<&str> = train.iter().map(|s| s.id.as_str()).collect();
    if let Some(s) = test.iter().find(|s| train_ids.contains(s.id.as_str())) {
        return Err(Error::Input(format!("sample '{}' is in both the training and test part", s.id)));
    }
    let (pipeline, training) = train_pipeline(&train, &config.pipeline, seed)?;
    let predicted = pipeline.predict_corpus(&test)?;
    let cm = class_matrix(&gold_classes(&test)?, &predicted)?;
    Ok((train.len(), training, pipeline.combiner.selection, metrics(&cm)))
}

/// Runs `repetitions` independent k-fold experiments. Each repetition draws
/// its own fold plan; each fold trains a fresh pipeline on the other folds
/// and is scored on its own. Units run concurrently with per-unit seeds, so
/// the report does not depend on scheduling.
pub fn run_experiment(corpus: &LabeledCorpus, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if corpus.space() != LabelSpace::ThreeClass {
        return Err(Error::Input("experiments need a three-class corpus".into()));
    }
    let plans = (0..config.repetitions)
        .map(|r| kfold(corpus.len(), config.folds, derive_seed(derive_seed(config.seed, r as u64), 0)))
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|r| (0..config.folds).map(move |f| (r, f)))
        .collect();

    let folds = units
        .par_iter()
        .map(|&(repetition, fold)| {
            let plan = &plans[repetition];
            let seed = derive_seed(derive_seed(config.seed, repetition as u64), 1 + fold as u64);
            run_fold(corpus, &plan.train_positions(fold), plan.test_positions(fold), config, seed)
                .map(|(train_size, training, selection, metrics)| FoldReport {
                    repetition,
                    fold,
                    train_size,
                    test_size: plan.test_positions(fold).len(),
                    training,
                    selection,
                    metrics,
                })
                .map_err(|e| Error::Fold {
                    fold,
                    repetition,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = summarize(&folds.iter().map(|f| &f.metrics).collect::<Vec<_>>());
    Ok(ExperimentReport {
        config: config.clone(),
        samples: corpus.len(),
        folds,
        summary,
    })
}

/// One line per label plus a `total` line: means and standard deviations.
pub fn summary_csv(summary: &ExperimentSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
        "f_mean",
        "f_std",
    ])?;
    for c in &summary.classes {
        let cells = [c.precision, c.recall, c.f_score].map(|s| [s.mean.to_string(), s.std.to_string()]);
        let mut record = vec![c.label.clone()];
        record.extend(cells.into_iter().flatten());
        w.write_record(&record)?;
    }
    let t = summary.total_f;
    w.write_record(["total", "", "", "", "", &t.mean.to_string(), &t.std.to_string()])?;
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(format!("csv output: {e}")))
}
