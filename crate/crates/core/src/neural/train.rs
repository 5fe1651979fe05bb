//! Mini-batch gradient descent for [`SequenceClassifier`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Gradients, SequenceClassifier};
use super::schedule::{run_schedule, EpochObservation, EpochRecord, EpochTrainer, TrainingSchedule};
use crate::error::{Error, Result};
use crate::persist;

/// An encoded sequence and its gold class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<u32>,
    pub target: usize,
}

impl Example {
    pub fn new(tokens: Vec<u32>, target: usize) -> Self {
        Example { tokens, target }
    }
}

/// Samples summed sequentially by one worker.
const CHUNK: usize = 32;
/// Chunks whose partial gradients are held in memory at once.
const GROUP: usize = 32;

/// Summed loss gradient over `batch`. Partial sums are formed over fixed
/// chunks and reduced in chunk order, so the result does not depend on the
/// number of worker threads.
pub(crate) fn batch_gradient(model: &SequenceClassifier, batch: &[&Example]) -> Gradients {
    let mut total = model.zero_gradients();
    for group in batch.chunks(CHUNK * GROUP) {
        let partials: Vec<Gradients> = group
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = model.zero_gradients();
                for ex in chunk {
                    model.accumulate_gradient(&ex.tokens, ex.target, &mut g);
                }
                g
            })
            .collect();
        for p in &partials {
            total.add(p);
        }
    }
    total
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean loss and accuracy of `model` over `data`.
pub fn evaluate(model: &SequenceClassifier, data: &[Example]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty set".into()));
    }
    let rows: Vec<(f64, bool)> = data
        .par_iter()
        .map(|ex| {
            let (p, loss) = model.forward_loss(&ex.tokens, ex.target)?;
            Ok((loss, argmax(&p) == ex.target))
        })
        .collect::<Result<_>>()?;
    let loss: f64 = rows.iter().map(|r| r.0).sum();
    let correct = rows.iter().filter(|r| r.1).count();
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

struct BatchTrainer<'a> {
    model: SequenceClassifier,
    train: &'a [Example],
    validation: &'a [Example],
    batch_size: usize,
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl EpochTrainer for BatchTrainer<'_> {
    type State = SequenceClassifier;

    fn fit_epoch(&mut self, _epoch: usize, rate: f64) -> Result<EpochObservation> {
        self.order.shuffle(&mut self.rng);
        for batch in self.order.chunks(self.batch_size) {
            let examples: Vec<&Example> = batch.iter().map(|&i| &self.train[i]).collect();
            let grads = batch_gradient(&self.model, &examples);
            self.model.apply_gradients(&grads, rate, examples.len() as f64);
        }
        let (training_loss, training_accuracy) = evaluate(&self.model, self.train)?;
        let (validation_error, validation_accuracy) = evaluate(&self.model, self.validation)?;
        Ok(EpochObservation {
            training_loss,
            training_accuracy,
            validation_error,
            validation_accuracy,
        })
    }

    fn snapshot(&self) -> SequenceClassifier {
        self.model.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub schedule: TrainingSchedule,
    pub history: Vec<EpochRecord>,
}

/// A classifier together with the record of how it was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub model: SequenceClassifier,
    pub report: TrainingReport,
}

pub const CLASSIFIER_FORMAT: &str = "sequence-classifier";
pub const CLASSIFIER_VERSION: u32 = 1;

impl TrainedClassifier {
    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_versioned(path, CLASSIFIER_FORMAT, CLASSIFIER_VERSION, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::read_versioned(path, CLASSIFIER_FORMAT, CLASSIFIER_VERSION)
    }
}

/// Trains `model` under `schedule`, shuffling the training set each epoch
/// with a stream seeded by `seed`. Returns the checkpointed state.
pub fn train(
    model: SequenceClassifier,
    train: &[Example],
    validation: &[Example],
    schedule: &TrainingSchedule,
    seed: u64,
) -> Result<TrainedClassifier> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Input("training and validation sets must be non-empty".into()));
    }
    let classes = model.config().output_classes;
    for ex in train.iter().chain(validation) {
        if ex.target >= classes {
            return Err(Error::Input(format!(
                "target class {} out of range for {classes} outputs",
                ex.target
            )));
        }
        model.forward(&ex.tokens)?;
    }

    let mut trainer = BatchTrainer {
        model,
        train,
        validation,
        batch_size: schedule.batch_size,
        order: (0..train.len()).collect(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let outcome = run_schedule(&mut trainer, schedule)?;
    Ok(TrainedClassifier {
        model: outcome.state,
        report: TrainingReport {
            seed,
            epochs_run: outcome.epochs_run,
            best_epoch: outcome.best_epoch,
            schedule: schedule.clone(),
            history: outcome.history,
        },
    })
}
