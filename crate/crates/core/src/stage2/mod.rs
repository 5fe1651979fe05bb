//! Second-stage combiners mapping first-stage feature rows to a class.

mod adaboost;
mod fixed;
mod forest;
mod gboost;
mod logistic;
mod stacked;
mod tree;

pub use adaboost::{AdaBoost, AdaBoostParams, BinaryBooster, Round};
pub use fixed::{argmax_class, fixed_criteria_ngram, fixed_criteria_unigram};
pub use forest::{ForestParams, RandomForest};
pub use gboost::{BoostingParams, GradientBoosting, LeafRule};
pub use logistic::{GradientDescent, LogisticModel, Solver};
pub use stacked::{encode_row, stacked_vote, train_stacked, StackedConfig, StackedEnsemble};
pub use tree::{gini_stats, second_order_stats, Node, Objective, Tree, TreeConfig};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Class;
use crate::persist;
use crate::rng::derive_seed;
use crate::stage1::{LabeledFeatures, StageOneFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    /// Argmax rule; the unigram or n-gram variant is chosen by row width.
    Fixed,
    Stacked,
    Lr,
    Rf,
    Ada,
    Gb,
    Xgb,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 7] = [
        CombinerKind::Fixed,
        CombinerKind::Stacked,
        CombinerKind::Lr,
        CombinerKind::Rf,
        CombinerKind::Ada,
        CombinerKind::Gb,
        CombinerKind::Xgb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CombinerKind::Fixed => "fixed",
            CombinerKind::Stacked => "stacked",
            CombinerKind::Lr => "lr",
            CombinerKind::Rf => "rf",
            CombinerKind::Ada => "ada",
            CombinerKind::Gb => "gb",
            CombinerKind::Xgb => "xgb",
        }
    }

    /// Whether the combiner learns from labeled rows.
    pub fn is_trained(self) -> bool {
        self != CombinerKind::Fixed
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed-criteria" => CombinerKind::Fixed,
            "stacked" | "stacked-deep" => CombinerKind::Stacked,
            "lr" | "logistic-regression" => CombinerKind::Lr,
            "rf" | "random-forest" => CombinerKind::Rf,
            "ada" | "adaboost" => CombinerKind::Ada,
            "gb" | "gradient-boosting" => CombinerKind::Gb,
            "xgb" | "second-order-boosting" => CombinerKind::Xgb,
            other => {
                return Err(Error::Config(format!(
                    "stage2: unknown combiner '{other}' (expected fixed, stacked, lr, rf, ada, gb or xgb)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticGrid {
    pub l2: Vec<f64>,
    pub solver: GradientDescent,
}

impl Default for LogisticGrid {
    fn default() -> Self {
        LogisticGrid {
            l2: vec![0.0, 1e-3],
            solver: GradientDescent::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGrid {
    pub trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub bootstrap: bool,
    pub max_features: Option<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            trees: vec![20, 100],
            max_depth: vec![10, 30],
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostGrid {
    pub trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: usize,
}

impl Default for AdaBoostGrid {
    fn default() -> Self {
        AdaBoostGrid {
            trees: vec![25, 50],
            learning_rate: vec![0.07, 0.14],
            max_depth: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingGrid {
    pub trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
}

impl Default for BoostingGrid {
    fn default() -> Self {
        BoostingGrid {
            trees: vec![50, 100],
            learning_rate: vec![0.1, 0.2],
            max_depth: vec![2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondOrderGrid {
    pub trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for SecondOrderGrid {
    fn default() -> Self {
        SecondOrderGrid {
            trees: vec![20, 30],
            learning_rate: vec![0.1, 0.22],
            max_depth: vec![2],
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinerConfig {
    pub kind: CombinerKind,
    /// Share of rows held out to rank grid candidates.
    pub selection_fraction: f64,
    pub stacked: StackedConfig,
    pub logistic: LogisticGrid,
    pub forest: ForestGrid,
    pub adaboost: AdaBoostGrid,
    pub boosting: BoostingGrid,
    pub second_order: SecondOrderGrid,
}

impl Default for CombinerConfig {
    fn default() -> Self {
        CombinerConfig {
            kind: CombinerKind::Fixed,
            selection_fraction: 0.2,
            stacked: StackedConfig::default(),
            logistic: LogisticGrid::default(),
            forest: ForestGrid::default(),
            adaboost: AdaBoostGrid::default(),
            boosting: BoostingGrid::default(),
            second_order: SecondOrderGrid::default(),
        }
    }
}

fn non_empty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name}: grid must not be empty")));
    }
    Ok(())
}

fn all_finite(name: &str, v: &[f64], min: f64, inclusive: bool) -> Result<()> {
    non_empty(name, v)?;
    if let Some(bad) = v.iter().find(|&&x| !x.is_finite() || x < min || (!inclusive && x == min)) {
        let bound = if inclusive { "at least" } else { "above" };
        return Err(Error::Config(format!("{name}: {bad} is not a finite value {bound} {min}")));
    }
    Ok(())
}

impl CombinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.selection_fraction > 0.0 && self.selection_fraction < 1.0) {
            return Err(Error::Config("selection_fraction: must lie in (0, 1)".into()));
        }
        match self.kind {
            CombinerKind::Fixed => {}
            CombinerKind::Stacked => self.stacked.validate()?,
            CombinerKind::Lr => all_finite("logistic.l2", &self.logistic.l2, 0.0, true)?,
            CombinerKind::Rf => {
                non_empty("forest.trees", &self.forest.trees)?;
                non_empty("forest.max_depth", &self.forest.max_depth)?;
            }
            CombinerKind::Ada => {
                non_empty("adaboost.trees", &self.adaboost.trees)?;
                all_finite("adaboost.learning_rate", &self.adaboost.learning_rate, 0.0, false)?;
            }
            CombinerKind::Gb => {
                non_empty("boosting.trees", &self.boosting.trees)?;
                all_finite("boosting.learning_rate", &self.boosting.learning_rate, 0.0, false)?;
                non_empty("boosting.max_depth", &self.boosting.max_depth)?;
            }
            CombinerKind::Xgb => {
                non_empty("second_order.trees", &self.second_order.trees)?;
                all_finite("second_order.learning_rate", &self.second_order.learning_rate, 0.0, false)?;
                non_empty("second_order.max_depth", &self.second_order.max_depth)?;
            }
        }
        Ok(())
    }
}

/// Trained parameters, tagged by combiner kind when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CombinerModel {
    FixedCriteriaUnigram,
    FixedCriteriaNgram,
    StackedDeep { ensemble: StackedEnsemble },
    LogisticRegression { l2: f64, model: LogisticModel },
    RandomForest { params: ForestParams, forest: RandomForest },
    Adaboost { params: AdaBoostParams, model: AdaBoost },
    GradientBoosting { params: BoostingParams, model: GradientBoosting },
    SecondOrderBoosting { params: BoostingParams, model: GradientBoosting },
}

/// Held-out accuracy of one grid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: serde_json::Value,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combiner {
    /// Feature width `2c` fixed at training time.
    pub width: usize,
    pub model: CombinerModel,
    /// Candidates ranked during selection, in grid order. Empty when the
    /// grid had a single candidate.
    pub selection: Vec<GridScore>,
}

pub const COMBINER_FORMAT: &str = "combiner";
pub const COMBINER_VERSION: u32 = 1;

impl Combiner {
    /// The argmax rule for rows of `width` 6 or 10.
    pub fn fixed(width: usize) -> Result<Combiner> {
        let model = match width {
            6 => CombinerModel::FixedCriteriaUnigram,
            10 => CombinerModel::FixedCriteriaNgram,
            w => {
                return Err(Error::WidthMismatch {
                    expected: if w < 8 { 6 } else { 10 },
                    actual: w,
                })
            }
        };
        Ok(Combiner {
            width,
            model,
            selection: Vec::new(),
        })
    }

    pub fn kind(&self) -> CombinerKind {
        match self.model {
            CombinerModel::FixedCriteriaUnigram | CombinerModel::FixedCriteriaNgram => CombinerKind::Fixed,
            CombinerModel::StackedDeep { .. } => CombinerKind::Stacked,
            CombinerModel::LogisticRegression { .. } => CombinerKind::Lr,
            CombinerModel::RandomForest { .. } => CombinerKind::Rf,
            CombinerModel::Adaboost { .. } => CombinerKind::Ada,
            CombinerModel::GradientBoosting { .. } => CombinerKind::Gb,
            CombinerModel::SecondOrderBoosting { .. } => CombinerKind::Xgb,
        }
    }

    pub fn predict(&self, features: &StageOneFeatures) -> Result<Class> {
        if features.width() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                actual: features.width(),
            });
        }
        let row = features.as_slice();
        Ok(match &self.model {
            CombinerModel::FixedCriteriaUnigram => fixed_criteria_unigram(features)?,
            CombinerModel::FixedCriteriaNgram => fixed_criteria_ngram(features)?,
            CombinerModel::StackedDeep { ensemble } => ensemble.predict(features)?,
            CombinerModel::LogisticRegression { model, .. } => model.predict(row),
            CombinerModel::RandomForest { forest, .. } => forest.predict(row),
            CombinerModel::Adaboost { model, .. } => model.predict(row),
            CombinerModel::GradientBoosting { model, .. } | CombinerModel::SecondOrderBoosting { model, .. } => {
                model.predict(row)
            }
        })
    }

    pub fn predict_all(&self, rows: &[StageOneFeatures]) -> Result<Vec<Class>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_versioned(path, COMBINER_FORMAT, COMBINER_VERSION, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::read_versioned(path, COMBINER_FORMAT, COMBINER_VERSION)
    }
}

fn check_rows(rows: &[LabeledFeatures], width: usize) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if rows.is_empty() {
        return Err(Error::Input("no rows to train the combiner on".into()));
    }
    for r in rows {
        if r.features.width() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                actual: r.features.width(),
            });
        }
    }
    let y: Vec<usize> = rows.iter().map(|r| r.label.index()).collect();
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::Input(format!(
            "all {} rows belong to class '{}'; a combiner needs at least two classes",
            rows.len(),
            rows[0].label
        )));
    }
    Ok((rows.iter().map(|r| r.features.as_slice().to_vec()).collect(), y))
}

/// Ranks `candidates` by accuracy on a stratified held-out share, then
/// refits the winner on every row. The first candidate wins ties.
fn grid_search<P, M>(
    x: &[Vec<f64>],
    y: &[usize],
    candidates: Vec<P>,
    fraction: f64,
    seed: u64,
    fit: impl Fn(&[Vec<f64>], &[usize], &P) -> M + Sync,
    predict: impl Fn(&M, &[f64]) -> Class + Sync,
) -> (P, M, Vec<GridScore>)
where
    P: Clone + Serialize + Send + Sync,
    M: Send,
{
    if candidates.len() == 1 {
        let p = candidates.into_iter().next().unwrap();
        let m = fit(x, y, &p);
        return (p, m, Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; y.len()];
    for class in 0..3 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let take = ((fraction * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        for &i in &idx[..take] {
            held[i] = true;
        }
    }
    let pick = |keep: bool| -> (Vec<Vec<f64>>, Vec<usize>) {
        (0..y.len())
            .filter(|&i| held[i] == keep)
            .map(|i| (x[i].clone(), y[i]))
            .unzip()
    };
    let (fx, fy) = pick(false);
    let (vx, vy) = pick(true);
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|p| {
            if vx.is_empty() {
                return 0.0;
            }
            let m = fit(&fx, &fy, p);
            let correct = vx.iter().zip(&vy).filter(|(r, &c)| predict(&m, r).index() == c).count();
            correct as f64 / vx.len() as f64
        })
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let log = candidates
        .iter()
        .zip(&scores)
        .map(|(p, &accuracy)| GridScore {
            params: serde_json::to_value(p).unwrap_or(serde_json::Value::Null),
            accuracy,
        })
        .collect();
    let p = candidates[best].clone();
    let m = fit(x, y, &p);
    (p, m, log)
}

fn product3<A: Copy, B: Copy, C: Copy, T>(a: &[A], b: &[B], c: &[C], f: impl Fn(A, B, C) -> T) -> Vec<T> {
    let mut out = Vec::new();
    for &x in a {
        for &y in b {
            for &z in c {
                out.push(f(x, y, z));
            }
        }
    }
    out
}

/// Trains the combiner named by `config.kind` on rows of `width` features.
/// The fixed rule ignores `rows`.
pub fn train_combiner(rows: &[LabeledFeatures], width: usize, config: &CombinerConfig, seed: u64) -> Result<Combiner> {
    config.validate()?;
    if config.kind == CombinerKind::Fixed {
        return Combiner::fixed(width);
    }
    let (x, y) = check_rows(rows, width)?;
    let frac = config.selection_fraction;
    let select_seed = derive_seed(seed, 0);
    let (model, selection) = match config.kind {
        CombinerKind::Fixed => unreachable!("handled above"),
        CombinerKind::Stacked => (
            CombinerModel::StackedDeep {
                ensemble: train_stacked(rows, &config.stacked, derive_seed(seed, 1))?,
            },
            Vec::new(),
        ),
        CombinerKind::Lr => {
            let solver = config.logistic.solver;
            let (l2, m, log) = grid_search(
                &x,
                &y,
                config.logistic.l2.clone(),
                frac,
                select_seed,
                |x, y, &l2| solver.fit(x, y, l2).expect("selection keeps rows on both sides"),
                |m, r| m.predict(r),
            );
            (CombinerModel::LogisticRegression { l2, model: m }, log)
        }
        CombinerKind::Rf => {
            let g = &config.forest;
            let candidates = product3(&g.trees, &g.max_depth, &[g.bootstrap], |trees, max_depth, bootstrap| ForestParams {
                trees,
                max_depth,
                bootstrap,
                max_features: g.max_features,
            });
            let forest_seed = derive_seed(seed, 2);
            let (params, forest, log) = grid_search(
                &x,
                &y,
                candidates,
                frac,
                select_seed,
                |x, y, p| RandomForest::fit(x, y, p, forest_seed),
                |m, r| m.predict(r),
            );
            (CombinerModel::RandomForest { params, forest }, log)
        }
        CombinerKind::Ada => {
            let g = &config.adaboost;
            let candidates = product3(&g.trees, &g.learning_rate, &[g.max_depth], |trees, learning_rate, max_depth| {
                AdaBoostParams {
                    trees,
                    learning_rate,
                    max_depth,
                }
            });
            let (params, model, log) = grid_search(
                &x,
                &y,
                candidates,
                frac,
                select_seed,
                |x, y, p| AdaBoost::fit(x, y, p),
                |m, r| m.predict(r),
            );
            (CombinerModel::Adaboost { params, model }, log)
        }
        CombinerKind::Gb | CombinerKind::Xgb => {
            let (trees, rates, depths, leaves) = if config.kind == CombinerKind::Gb {
                let g = &config.boosting;
                (&g.trees, &g.learning_rate, &g.max_depth, LeafRule::Newton)
            } else {
                let g = &config.second_order;
                (
                    &g.trees,
                    &g.learning_rate,
                    &g.max_depth,
                    LeafRule::SecondOrder {
                        lambda: g.lambda,
                        min_child_weight: g.min_child_weight,
                    },
                )
            };
            let candidates = product3(trees, rates, depths, |trees, learning_rate, max_depth| BoostingParams {
                trees,
                learning_rate,
                max_depth,
                leaves,
            });
            let (params, model, log) = grid_search(
                &x,
                &y,
                candidates,
                frac,
                select_seed,
                |x, y, p| GradientBoosting::fit(x, y, p),
                |m, r| m.predict(r),
            );
            let model = if config.kind == CombinerKind::Gb {
                CombinerModel::GradientBoosting { params, model }
            } else {
                CombinerModel::SecondOrderBoosting { params, model }
            };
            (model, log)
        }
    };
    Ok(Combiner { width, model, selection })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<LabeledFeatures> {
        (0..n)
            .map(|i| {
                let class = Class::ALL[i % 3];
                let mut p = [0.15 + (i % 4) as f64 * 0.05; 3];
                p[class.index()] = 0.7 + (i % 5) as f64 * 0.05;
                LabeledFeatures {
                    features: StageOneFeatures::from_positive(&p).unwrap(),
                    label: class,
                }
            })
            .collect()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CombinerKind::ALL {
            assert_eq!(k.as_str().parse::<CombinerKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{k}\""));
        }
        assert!("svm".parse::<CombinerKind>().is_err());
    }

    #[test]
    fn every_classic_learner_fits_separable_rows() {
        let data = rows(90);
        for kind in [CombinerKind::Lr, CombinerKind::Rf, CombinerKind::Ada, CombinerKind::Gb, CombinerKind::Xgb] {
            let mut config = CombinerConfig {
                kind,
                ..CombinerConfig::default()
            };
            config.second_order.min_child_weight = 0.1;
            let c = train_combiner(&data, 6, &config, 3).unwrap();
            assert_eq!(c.kind(), kind);
            assert!(!c.selection.is_empty(), "{kind}");
            let correct = data.iter().filter(|r| c.predict(&r.features).unwrap() == r.label).count();
            assert!(correct >= 85, "{kind}: {correct}");
        }
    }

    #[test]
    fn fixed_combiner_needs_known_width() {
        assert_eq!(Combiner::fixed(6).unwrap().model, CombinerModel::FixedCriteriaUnigram);
        assert_eq!(Combiner::fixed(10).unwrap().model, CombinerModel::FixedCriteriaNgram);
        assert!(Combiner::fixed(8).is_err());
        let c = train_combiner(&[], 10, &CombinerConfig::default(), 0).unwrap();
        let f = StageOneFeatures::from_positive(&[0.5, 0.4, 0.9, 0.6, 0.3]).unwrap();
        assert_eq!(c.predict(&f).unwrap(), Class::Racism);
        assert!(c.predict(&StageOneFeatures::from_positive(&[0.5; 3]).unwrap()).is_err());
    }

    #[test]
    fn single_class_rows_are_rejected() {
        let data: Vec<LabeledFeatures> = rows(9).into_iter().filter(|r| r.label == Class::Racism).collect();
        let config = CombinerConfig {
            kind: CombinerKind::Lr,
            ..CombinerConfig::default()
        };
        assert!(train_combiner(&data, 6, &config, 0).is_err());
        assert!(train_combiner(&[], 6, &config, 0).is_err());
    }

    #[test]
    fn container_round_trip() {
        let data = rows(30);
        let config = CombinerConfig {
            kind: CombinerKind::Gb,
            boosting: BoostingGrid {
                trees: vec![5],
                learning_rate: vec![0.1],
                max_depth: vec![2],
            },
            ..CombinerConfig::default()
        };
        let c = train_combiner(&data, 6, &config, 1).unwrap();
        assert!(c.selection.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        c.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"kind\": \"gradient-boosting\""));
        assert_eq!(Combiner::load(&path).unwrap(), c);
    }
}
