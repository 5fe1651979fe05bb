//! Multinomial logistic regression with a pluggable solver.

use serde::{Deserialize, Serialize};

use super::fixed::argmax_class;
use crate::error::{Error, Result};
use crate::label::Class;

const CLASSES: usize = 3;

/// Weights `w[k]` (one row per class) and intercepts `b[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(features: usize) -> Self {
        LogisticModel {
            weights: vec![vec![0.0; features]; CLASSES],
            intercepts: vec![0.0; CLASSES],
        }
    }

    pub fn scores(&self, row: &[f64]) -> [f64; CLASSES] {
        let mut s = [0.0; CLASSES];
        for (k, out) in s.iter_mut().enumerate() {
            *out = self.intercepts[k] + self.weights[k].iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        }
        s
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        argmax_class(self.scores(row))
    }
}

/// Minimizes mean softmax cross-entropy plus `l2 / 2 * |W|^2`.
pub trait Solver {
    fn fit(&self, x: &[Vec<f64>], y: &[usize], l2: f64) -> Result<LogisticModel>;
}

/// Full-batch gradient descent with step `1 / L`, where `L` bounds the
/// curvature of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientDescent {
    pub max_iterations: usize,
    /// Stop once the largest gradient component falls below this.
    pub tolerance: f64,
}

impl Default for GradientDescent {
    fn default() -> Self {
        GradientDescent {
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

fn softmax3(s: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = s.map(|v| (v - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

impl Solver for GradientDescent {
    fn fit(&self, x: &[Vec<f64>], y: &[usize], l2: f64) -> Result<LogisticModel> {
        let n = x.len();
        if n == 0 {
            return Err(Error::Input("logistic regression needs at least one row".into()));
        }
        let d = x[0].len();
        // Softmax cross-entropy has Hessian bounded by 1/2 * E[|x|^2 + 1].
        let max_norm = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
        let step = 1.0 / (0.5 * (max_norm + 1.0) + l2);
        let mut model = LogisticModel::zeros(d);
        let mut gw = vec![vec![0.0; d]; CLASSES];
        for _ in 0..self.max_iterations {
            gw.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
            let mut gb = [0.0; CLASSES];
            for (row, &c) in x.iter().zip(y) {
                let p = softmax3(model.scores(row));
                for k in 0..CLASSES {
                    let r = p[k] - if k == c { 1.0 } else { 0.0 };
                    gb[k] += r;
                    for (g, v) in gw[k].iter_mut().zip(row) {
                        *g += r * v;
                    }
                }
            }
            let mut largest: f64 = 0.0;
            for k in 0..CLASSES {
                gb[k] /= n as f64;
                largest = largest.max(gb[k].abs());
                for j in 0..d {
                    gw[k][j] = gw[k][j] / n as f64 + l2 * model.weights[k][j];
                    largest = largest.max(gw[k][j].abs());
                }
            }
            if largest < self.tolerance {
                break;
            }
            for k in 0..CLASSES {
                model.intercepts[k] -= step * gb[k];
                for j in 0..d {
                    model.weights[k][j] -= step * gw[k][j];
                }
            }
        }
        Ok(model)
    }
}
