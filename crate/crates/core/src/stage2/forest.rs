//! Random forest of Gini trees combined by majority vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{gini_stats, Objective, Tree, TreeConfig};
use crate::label::Class;
use crate::rng::derive_seed;

const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Draw each tree's rows with replacement.
    pub bootstrap: bool,
    /// Features examined per split; `None` means `ceil(sqrt(width))`.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &ForestParams, seed: u64) -> RandomForest {
        let n = x.len();
        let width = x.first().map_or(0, Vec::len);
        let max_features = params
            .max_features
            .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
            .clamp(1, width.max(1));
        let config = TreeConfig {
            max_features: Some(max_features),
            ..TreeConfig::with_depth(params.max_depth)
        };
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let mut weights = vec![0.0; n];
                if params.bootstrap {
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    weights.iter_mut().for_each(|w| *w = 1.0);
                }
                let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
                let stats = gini_stats(y, &weights, CLASSES);
                Tree::fit(x, &stats, &active, Objective::Gini { classes: CLASSES }, &config, Some(&mut rng))
            })
            .collect();
        RandomForest { trees }
    }

    /// Per-class vote counts of the trees' argmax predictions.
    pub fn votes(&self, row: &[f64]) -> [usize; CLASSES] {
        let mut votes = [0; CLASSES];
        for t in &self.trees {
            let p = t.predict(row);
            let mut best = 0;
            for k in 1..CLASSES {
                if p[k] > p[best] {
                    best = k;
                }
            }
            votes[best] += 1;
        }
        votes
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        let v = self.votes(row);
        super::fixed::argmax_class(v.map(|c| c as f64))
    }
}
