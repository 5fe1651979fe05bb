//! Two-stage one-vs-rest text classification for multi-class hate speech
//! detection.
//!
//! The first stage is a bank of binary recurrent classifiers, one per class
//! on word unigrams plus extra racism detectors on bigrams and trigrams.
//! Their probability pairs become the features of a second-stage combiner:
//! a fixed argmax rule, a stacked ensemble of recurrent models, or one of
//! several classic learners. [`eval`] runs cross-validation and
//! cross-dataset generalization over the whole pipeline.

pub mod augment;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod label;
pub mod neural;
pub mod persist;
pub mod rng;
pub mod stage1;
pub mod stage2;
pub mod vectorizer;

pub use error::{Error, ErrorKind, Result};
pub use label::{BinaryClass, Class, Label, LabelMap, LabelSpace};
