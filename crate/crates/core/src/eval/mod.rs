//! Metrics, cross-validation and cross-dataset generalization.

pub mod experiment;
pub mod generalize;
pub mod kfold;
pub mod metrics;
pub mod pipeline;

pub use experiment::{run_experiment, summarize, summary_csv, ExperimentConfig, ExperimentReport, FoldReport, Stat};
pub use generalize::{generalize, rule_decision, GeneralizationReport, Rule};
pub use kfold::{kfold, FoldPlan};
pub use metrics::{metrics, weighted_total, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use pipeline::{train_pipeline, Pipeline, PipelineConfig, TrainingSummary};
