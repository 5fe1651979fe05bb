//! Multinomial-deviance gradient boosting, first- and second-order.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixed::argmax_class;
use super::tree::{second_order_stats, Objective, Tree, TreeConfig};
use crate::label::Class;

const CLASSES: usize = 3;
/// Floor for Hessians and priors.
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeafRule {
    /// Trees fitted to the negative gradient by squared error, leaves set
    /// by one Newton step on the deviance.
    Newton,
    /// Splits and leaves from gradient and Hessian sums with an L2 penalty
    /// on leaf values.
    SecondOrder { lambda: f64, min_child_weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub leaves: LeafRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    /// Log class priors.
    pub initial: Vec<f64>,
    pub learning_rate: f64,
    /// `rounds[r][k]` is round `r`'s tree for class `k`.
    pub rounds: Vec<Vec<Tree>>,
}

fn softmax(s: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = s.map(|v| (v - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

impl GradientBoosting {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &BoostingParams) -> GradientBoosting {
        let n = x.len();
        let mut counts = [0.0; CLASSES];
        for &c in y {
            counts[c] += 1.0;
        }
        let initial: Vec<f64> = counts.iter().map(|c| (c / n as f64).max(TINY).ln()).collect();
        let mut f: Vec<[f64; CLASSES]> = vec![[initial[0], initial[1], initial[2]]; n];
        let active: Vec<usize> = (0..n).collect();
        let config = TreeConfig::with_depth(params.max_depth);
        let mut rounds = Vec::with_capacity(params.trees);

        for _ in 0..params.trees {
            let p: Vec<[f64; CLASSES]> = f.iter().map(softmax).collect();
            let mut round = Vec::with_capacity(CLASSES);
            for k in 0..CLASSES {
                let g: Vec<f64> = (0..n).map(|i| p[i][k] - if y[i] == k { 1.0 } else { 0.0 }).collect();
                let h: Vec<f64> = (0..n).map(|i| (p[i][k] * (1.0 - p[i][k])).max(TINY)).collect();
                let tree = match params.leaves {
                    LeafRule::Newton => {
                        let ones = vec![1.0; n];
                        let obj = Objective::SecondOrder {
                            lambda: 0.0,
                            min_child_weight: 0.0,
                        };
                        let mut tree =
                            Tree::fit::<ChaCha8Rng>(x, &second_order_stats(&g, &ones), &active, obj, &config, None);
                        let mut sums = vec![(0.0, 0.0); tree.nodes().len()];
                        for i in 0..n {
                            let leaf = tree.leaf_index(&x[i]);
                            sums[leaf].0 += g[i];
                            sums[leaf].1 += h[i];
                        }
                        let scale = (CLASSES as f64 - 1.0) / CLASSES as f64;
                        for (leaf, (gs, hs)) in sums.into_iter().enumerate() {
                            if hs > 0.0 {
                                tree.set_leaf(leaf, vec![-scale * gs / hs]);
                            }
                        }
                        tree
                    }
                    LeafRule::SecondOrder { lambda, min_child_weight } => {
                        let obj = Objective::SecondOrder { lambda, min_child_weight };
                        Tree::fit::<ChaCha8Rng>(x, &second_order_stats(&g, &h), &active, obj, &config, None)
                    }
                };
                round.push(tree);
            }
            for (i, row) in x.iter().enumerate() {
                for k in 0..CLASSES {
                    f[i][k] += params.learning_rate * round[k].predict(row)[0];
                }
            }
            rounds.push(round);
        }
        GradientBoosting {
            initial,
            learning_rate: params.learning_rate,
            rounds,
        }
    }

    pub fn raw_scores(&self, row: &[f64]) -> [f64; CLASSES] {
        let mut s = [self.initial[0], self.initial[1], self.initial[2]];
        for round in &self.rounds {
            for k in 0..CLASSES {
                s[k] += self.learning_rate * round[k].predict(row)[0];
            }
        }
        s
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        argmax_class(self.raw_scores(row))
    }
}
