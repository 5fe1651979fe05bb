#![allow(dead_code)]

use ovrstack::corpus::{LabeledCorpus, Sample};
use ovrstack::eval::PipelineConfig;
use ovrstack::neural::TrainingSchedule;
use ovrstack::stage1::{MemberSchedules, NetworkShape, StageOneConfig};
use ovrstack::stage2::{CombinerConfig, CombinerKind};
use ovrstack::{Class, Label, LabelSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FILLER_WORDS: usize = 10;

const FILLER: [&str; 24] = [
    "the", "a", "day", "so", "we", "it", "was", "and", "just", "really", "this", "that", "people", "time", "going",
    "said", "about", "know", "think", "right", "new", "good", "still", "here",
];

/// Keyword families; every sample carries one or two words of its class.
pub const FAMILIES: [(Class, [&str; 6]); 3] = [
    (Class::Neutral, ["sunny", "coffee", "football", "weekend", "music", "garden"]),
    (Class::Sexism, ["kitchen", "sandwich", "feminazi", "housewife", "makeup", "bossy"]),
    (Class::Racism, ["border", "deport", "jihad", "invaders", "savages", "mosque"]),
];

/// `n` samples cycling through classes 50/25/25 (N/S/R). A `noise` share
/// of labels is redrawn uniformly from the three classes.
pub fn keyword_corpus(n: usize, noise: f64, seed: u64) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let class = [Class::Neutral, Class::Sexism, Class::Neutral, Class::Racism][i % 4];
            let family = FAMILIES[class.index()].1;
            let len = rng.random_range(2..7);
            let mut words: Vec<&str> = (0..len).map(|_| FILLER[rng.random_range(0..FILLER_WORDS)]).collect();
            for _ in 0..rng.random_range(1..=2) {
                let at = rng.random_range(0..=words.len());
                words.insert(at, family[rng.random_range(0..family.len())]);
            }
            let label = if rng.random_bool(noise) {
                Class::ALL[rng.random_range(0..3)]
            } else {
                class
            };
            Sample::new(format!("s{seed}-{i}"), words.join(" "), Some(Label::Class(label)))
        })
        .collect();
    LabeledCorpus::new(samples, LabelSpace::ThreeClass).unwrap()
}

/// A small network with a fast schedule, sized for corpora of hundreds.
/// The larger holdout steadies checkpoint selection on small folds.
pub fn quick_stage1(classifiers: usize, max_epochs: usize) -> StageOneConfig {
    StageOneConfig {
        classifiers,
        validation_fraction: 0.3,
        network: NetworkShape {
            embedding_dim: 8,
            recurrent_units: 8,
            dense_units: Some(8),
            ..NetworkShape::default()
        },
        schedules: MemberSchedules::default().map(|s| TrainingSchedule {
            initial_rate: 0.3,
            decay_rate: 0.05,
            max_epochs,
            batch_size: 8,
            ..s.clone()
        }),
        ..StageOneConfig::default()
    }
}

pub fn quick_pipeline(classifiers: usize, kind: CombinerKind, max_epochs: usize) -> PipelineConfig {
    PipelineConfig {
        stage1: quick_stage1(classifiers, max_epochs),
        stage2: CombinerConfig {
            kind,
            ..CombinerConfig::default()
        },
        augmentation: None,
    }
}
