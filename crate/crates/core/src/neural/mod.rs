//! From-scratch recurrent sequence classifier and its training loop.

mod gradcheck;
mod model;
mod schedule;
mod train;

pub use gradcheck::{gradient_check, gradient_check_with, GradientCheck, FINITE_DIFFERENCE_STEP};
pub use model::{CellActivation, Gradients, Loss, SequenceClassifier, SequenceClassifierConfig};
pub use schedule::{
    run_schedule, EpochObservation, EpochRecord, EpochTrainer, ScheduleOutcome, TrainingSchedule,
    FIRST_STAGE_BATCH, INITIAL_PATIENCE, MAX_EPOCHS, RATE_FLOOR, SECOND_STAGE_BATCH,
};
pub use train::{evaluate, train, Example, TrainedClassifier, TrainingReport, CLASSIFIER_FORMAT, CLASSIFIER_VERSION};
