//! Synthetic second-stage rows generated by bounded relative perturbation of
//! existing rows, and the probability quantizer used by the stacked ensemble.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Class;
use crate::rng::derive_seed;
use crate::stage1::{LabeledFeatures, StageOneFeatures};

pub const DEFAULT_MDV: f64 = 0.02;
/// Rows generated per class by default; three classes give about 80,000.
pub const DEFAULT_PER_CLASS: usize = 26_667;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Maximum relative divergence from the source value.
    pub mdv: f64,
    /// Rows to generate for each class.
    pub per_class: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mdv: DEFAULT_MDV,
            per_class: DEFAULT_PER_CLASS,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mdv > 0.0 && self.mdv < 1.0) {
            return Err(Error::Config(format!("mdv: must lie in (0, 1), got {}", self.mdv)));
        }
        Ok(())
    }
}

/// `v * (1 + coin * mdv)` clamped to `[0, 1]`.
pub fn perturb(v: f64, coin: f64, mdv: f64) -> f64 {
    (v * (1.0 + coin * mdv)).clamp(0.0, 1.0)
}

/// One generated row with the provenance needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    /// Index of the source row.
    pub source: usize,
    /// Perturbed and clamped values before pair re-normalization.
    pub perturbed: Vec<f64>,
    pub row: LabeledFeatures,
}

fn check_rows(rows: &[LabeledFeatures]) -> Result<(Class, usize)> {
    let first = rows.first().ok_or_else(|| Error::Input("cannot augment an empty set of rows".into()))?;
    for r in rows {
        if r.label != first.label {
            return Err(Error::Input(format!(
                "rows mix classes '{}' and '{}'",
                first.label, r.label
            )));
        }
        if r.features.width() != first.features.width() {
            return Err(Error::WidthMismatch {
                expected: first.features.width(),
                actual: r.features.width(),
            });
        }
    }
    Ok((first.label, first.features.width()))
}

/// Generates `n` rows from `rows`, all of one class, with the given seed.
///
/// Each draw picks a source row uniformly, flips an independent fair coin
/// per feature, perturbs and clamps, then rescales each `(p, 1 - p)` pair
/// back to unit sum. The label is copied unchanged.
pub fn generate_detailed(rows: &[LabeledFeatures], n: usize, mdv: f64, seed: u64) -> Result<Vec<GeneratedSample>> {
    let (label, width) = check_rows(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random();
        let source = ((a * rows.len() as f64) as usize).min(rows.len() - 1);
        let perturbed: Vec<f64> = rows[source]
            .features
            .as_slice()
            .iter()
            .map(|&v| {
                let coin = if rng.random::<bool>() { 1.0 } else { -1.0 };
                perturb(v, coin, mdv)
            })
            .collect();
        let mut values = Vec::with_capacity(width);
        for pair in perturbed.chunks(2) {
            let p = pair[0] / (pair[0] + pair[1]);
            values.push(p);
            values.push(1.0 - p);
        }
        out.push(GeneratedSample {
            source,
            perturbed,
            row: LabeledFeatures {
                features: StageOneFeatures::from_values_unchecked(values),
                label,
            },
        });
    }
    Ok(out)
}

pub fn generate_samples(rows: &[LabeledFeatures], config: &AugmentConfig) -> Result<Vec<LabeledFeatures>> {
    config.validate()?;
    Ok(generate_detailed(rows, config.per_class, config.mdv, config.seed)?
        .into_iter()
        .map(|g| g.row)
        .collect())
}

/// Generates `config.per_class` rows for every class present in `rows`,
/// each class from its own seed stream. Output is grouped by class in
/// tie-breaking order.
pub fn augment_rows(rows: &[LabeledFeatures], config: &AugmentConfig) -> Result<Vec<LabeledFeatures>> {
    config.validate()?;
    let mut by_class: BTreeMap<Class, Vec<LabeledFeatures>> = BTreeMap::new();
    for r in rows {
        by_class.entry(r.label).or_default().push(r.clone());
    }
    let mut out = Vec::with_capacity(by_class.len() * config.per_class);
    for (class, group) in &by_class {
        let seed = derive_seed(config.seed, class.index() as u64);
        out.extend(generate_detailed(group, config.per_class, config.mdv, seed)?.into_iter().map(|g| g.row));
    }
    Ok(out)
}

/// Chance that two generated rows coincide when each of `y` classifier
/// outputs takes one of `10^x` states: `1 / (10^x)^y`.
pub fn overlap_probability(x: u32, y: u32) -> f64 {
    1.0 / 10f64.powi(x as i32).powi(y as i32)
}

/// `floor(p * 10^m)` clamped to `[0, 10^m - 1]`.
pub fn quantize(p: f64, m: u32) -> u32 {
    let states = 10u32.pow(m);
    let q = (p * states as f64).floor();
    if q.is_nan() || q < 0.0 {
        0
    } else {
        (q as u32).min(states - 1)
    }
}
