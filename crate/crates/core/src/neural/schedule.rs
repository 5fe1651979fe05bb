//! Decaying learning-rate schedule and the patience-based training driver
//! that checkpoints the best validation state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound for the learning rate.
pub const RATE_FLOOR: f64 = 0.01;
/// Epoch budget granted at start and restored on every checkpoint.
pub const INITIAL_PATIENCE: usize = 40;
pub const MAX_EPOCHS: usize = 200;
pub const FIRST_STAGE_BATCH: usize = 1024;
pub const SECOND_STAGE_BATCH: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSchedule {
    pub initial_rate: f64,
    pub decay_rate: f64,
    #[serde(default = "default_floor")]
    pub rate_floor: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_floor() -> f64 {
    RATE_FLOOR
}
fn default_patience() -> usize {
    INITIAL_PATIENCE
}
fn default_max_epochs() -> usize {
    MAX_EPOCHS
}
fn default_batch() -> usize {
    FIRST_STAGE_BATCH
}

impl TrainingSchedule {
    pub fn new(initial_rate: f64, decay_rate: f64) -> Self {
        TrainingSchedule {
            initial_rate,
            decay_rate,
            rate_floor: RATE_FLOOR,
            patience: INITIAL_PATIENCE,
            max_epochs: MAX_EPOCHS,
            batch_size: FIRST_STAGE_BATCH,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_rate > 0.0 && self.initial_rate.is_finite()) {
            return Err(Error::Config("initial_rate: must be positive".into()));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::Config("decay_rate: must be non-negative".into()));
        }
        if !(self.rate_floor > 0.0) {
            return Err(Error::Config("rate_floor: must be positive".into()));
        }
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "patience, max_epochs and batch_size must all be positive".into(),
            ));
        }
        Ok(())
    }

    /// Rate set after epoch `ep`: `initial / (1 + decay * ep)`, never below
    /// the floor. A schedule that starts below the floor stays at its
    /// initial rate.
    pub fn learning_rate(&self, ep: usize) -> f64 {
        let rate = self.initial_rate / (1.0 + self.decay_rate * ep as f64);
        if rate > self.rate_floor {
            rate
        } else {
            self.rate_floor.min(self.initial_rate)
        }
    }
}

/// Metrics gathered after fitting one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochObservation {
    pub training_loss: f64,
    pub training_accuracy: f64,
    pub validation_error: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub rate: f64,
    pub observation: EpochObservation,
    pub improved: bool,
    pub overfitting: bool,
    pub checkpoint: bool,
    /// Remaining epoch budget after this epoch's decisions.
    pub epochs_left: usize,
}

/// Something that can be fitted one epoch at a time and snapshotted.
pub trait EpochTrainer {
    type State: Clone;

    fn fit_epoch(&mut self, epoch: usize, rate: f64) -> Result<EpochObservation>;

    fn snapshot(&self) -> Self::State;
}

#[derive(Debug, Clone)]
pub struct ScheduleOutcome<S> {
    /// Checkpointed state, or the final state if no epoch qualified.
    pub state: S,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
}

/// Runs the patience loop:
///
/// ```text
/// while epochs_left > 0 and epoch < max_epochs:
///     epochs_left -= 1; fit with rate; epoch += 1
///     if validation error and accuracy both beat the best checkpoint
///        and validation accuracy <= training accuracy:
///         checkpoint; epochs_left = patience
///     if rate > floor: rate = learning_rate(epoch)
/// ```
pub fn run_schedule<T: EpochTrainer>(trainer: &mut T, schedule: &TrainingSchedule) -> Result<ScheduleOutcome<T::State>> {
    schedule.validate()?;
    let mut epochs_left = schedule.patience;
    let mut epoch = 0;
    let mut rate = schedule.initial_rate;
    let mut best: Option<(f64, f64, usize, T::State)> = None;
    let mut history = Vec::new();

    while epochs_left > 0 && epoch < schedule.max_epochs {
        epochs_left -= 1;
        let obs = trainer.fit_epoch(epoch + 1, rate)?;
        epoch += 1;

        for (name, v) in [("training loss", obs.training_loss), ("validation error", obs.validation_error)] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    detail: format!("{name} is {v}"),
                });
            }
        }

        let improved = match &best {
            None => true,
            Some((err, acc, _, _)) => obs.validation_error < *err && obs.validation_accuracy > *acc,
        };
        let overfitting = obs.validation_accuracy > obs.training_accuracy;
        let checkpoint = improved && !overfitting;
        if checkpoint {
            best = Some((obs.validation_error, obs.validation_accuracy, epoch, trainer.snapshot()));
            epochs_left = schedule.patience;
        }

        history.push(EpochRecord {
            epoch,
            rate,
            observation: obs,
            improved,
            overfitting,
            checkpoint,
            epochs_left,
        });

        if rate > schedule.rate_floor {
            rate = schedule.learning_rate(epoch);
        }
    }

    let (state, best_epoch) = match best {
        Some((_, _, e, s)) => (s, Some(e)),
        None => (trainer.snapshot(), None),
    };
    Ok(ScheduleOutcome {
        state,
        best_epoch,
        epochs_run: epoch,
        history,
    })
}
