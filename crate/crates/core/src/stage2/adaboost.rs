//! One-vs-rest discrete AdaBoost over depth-limited trees.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixed::argmax_class;
use super::tree::{gini_stats, Objective, Tree, TreeConfig};
use crate::label::Class;

const CLASSES: usize = 3;
/// Errors are kept inside `[EPS, 1 - EPS]` when computing learner weights.
const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    /// Maximum rounds per one-vs-rest problem.
    pub trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

/// One round: the weak learner, its weight, and its weighted training error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub tree: Tree,
    pub alpha: f64,
    pub error: f64,
}

/// Boosted detector for one class against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryBooster {
    pub rounds: Vec<Round>,
    /// Sum of sample weights after each accepted round's update.
    pub weight_sums: Vec<f64>,
}

impl BinaryBooster {
    /// `positive[i]` marks the class being detected.
    pub fn fit(x: &[Vec<f64>], positive: &[bool], params: &AdaBoostParams) -> BinaryBooster {
        let n = x.len();
        let mut w = vec![1.0 / n as f64; n];
        let labels: Vec<usize> = positive.iter().map(|&p| if p { 1 } else { 0 }).collect();
        let active: Vec<usize> = (0..n).collect();
        let config = TreeConfig::with_depth(params.max_depth);
        let mut out = BinaryBooster {
            rounds: Vec::new(),
            weight_sums: Vec::new(),
        };
        for _ in 0..params.trees {
            let stats = gini_stats(&labels, &w, 2);
            let tree = Tree::fit::<ChaCha8Rng>(x, &stats, &active, Objective::Gini { classes: 2 }, &config, None);
            let h: Vec<bool> = x.iter().map(|r| vote(&tree, r) > 0.0).collect();
            let error: f64 = (0..n).filter(|&i| h[i] != positive[i]).map(|i| w[i]).sum();
            if error >= 0.5 {
                break;
            }
            let e = error.clamp(EPS, 1.0 - EPS);
            let alpha = params.learning_rate * 0.5 * ((1.0 - e) / e).ln();
            for i in 0..n {
                let agree = if h[i] == positive[i] { 1.0 } else { -1.0 };
                w[i] *= (-alpha * agree).exp();
            }
            let z: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= z);
            out.weight_sums.push(w.iter().sum());
            out.rounds.push(Round { tree, alpha, error });
            if error == 0.0 {
                break;
            }
        }
        out
    }

    /// `sum(alpha * h(x))` with `h` in `{-1, +1}`.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.rounds.iter().map(|r| r.alpha * vote(&r.tree, row)).sum()
    }
}

fn vote(tree: &Tree, row: &[f64]) -> f64 {
    let p = tree.predict(row);
    if p[1] > p[0] {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    /// One booster per class in tie-breaking order.
    pub boosters: Vec<BinaryBooster>,
}

impl AdaBoost {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &AdaBoostParams) -> AdaBoost {
        let boosters = (0..CLASSES)
            .map(|k| {
                let positive: Vec<bool> = y.iter().map(|&c| c == k).collect();
                BinaryBooster::fit(x, &positive, params)
            })
            .collect();
        AdaBoost { boosters }
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        let s: Vec<f64> = self.boosters.iter().map(|b| b.score(row)).collect();
        argmax_class([s[0], s[1], s[2]])
    }
}
