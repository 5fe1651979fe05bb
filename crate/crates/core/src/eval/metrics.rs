//! Confusion matrices and precision / recall / F metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[gold][predicted]` over a fixed, named label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Builds a matrix from `(gold, predicted)` index pairs.
    pub fn from_pairs<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut cm = Self::new(labels);
        for (g, p) in pairs {
            cm.add(g, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, gold: usize, predicted: usize) -> Result<()> {
        let n = self.labels.len();
        if gold >= n || predicted >= n {
            return Err(Error::Input(format!(
                "label index ({gold}, {predicted}) outside a {n}-label matrix"
            )));
        }
        self.counts[gold][predicted] += 1;
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.labels.len()).filter(|&g| g != class).map(|g| self.counts[g][class]).sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.labels.len()).filter(|&p| p != class).map(|p| self.counts[class][p]).sum()
    }

    /// Number of samples whose gold label is `class`.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Gold population of the class.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    /// Population-weighted mean of the per-class F scores.
    pub total_f: f64,
    pub accuracy: f64,
    pub samples: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `sum(n_i * F_i) / sum(n_i)`, or 0 when every population is empty.
pub fn weighted_total(f_scores: &[f64], populations: &[u64]) -> f64 {
    let n: u64 = populations.iter().sum();
    let weighted: f64 = f_scores.iter().zip(populations).map(|(f, &n)| f * n as f64).sum();
    ratio(weighted, n as f64)
}

/// Per-class precision, recall and F; any metric with a zero denominator
/// is 0.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let classes: Vec<ClassMetrics> = (0..cm.labels.len())
        .map(|k| {
            let tp = cm.true_positives(k) as f64;
            let precision = ratio(tp, tp + cm.false_positives(k) as f64);
            let recall = ratio(tp, tp + cm.false_negatives(k) as f64);
            ClassMetrics {
                label: cm.labels[k].clone(),
                precision,
                recall,
                f_score: ratio(2.0 * precision * recall, precision + recall),
                support: cm.support(k),
            }
        })
        .collect();
    let f: Vec<f64> = classes.iter().map(|c| c.f_score).collect();
    let n: Vec<u64> = classes.iter().map(|c| c.support).collect();
    let correct: u64 = (0..cm.labels.len()).map(|k| cm.true_positives(k)).sum();
    MetricsReport {
        total_f: weighted_total(&f, &n),
        accuracy: ratio(correct as f64, cm.total() as f64),
        samples: cm.total(),
        classes,
        confusion: cm.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direct_formula() {
        // Class 0: TP 8, FP 2, FN 0.
        let mut pairs = vec![(0, 0); 8];
        pairs.extend([(1, 0), (1, 0), (1, 1)]);
        let cm = ConfusionMatrix::from_pairs(["a", "b", "c"], pairs).unwrap();
        let r = metrics(&cm);
        assert!((r.classes[0].precision - 0.8).abs() < 1e-15);
        assert_eq!(r.classes[0].recall, 1.0);
        assert!((r.classes[0].f_score - 8.0 / 9.0).abs() < 1e-15);
        let empty = &r.classes[2];
        assert_eq!((empty.precision, empty.recall, empty.f_score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn weighted_example() {
        assert!((weighted_total(&[0.9, 0.5], &[90, 10]) - 0.86).abs() < 1e-12);
        assert_eq!(weighted_total(&[0.3], &[0]), 0.0);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let mut cm = ConfusionMatrix::new(["x", "y"]);
        assert!(cm.add(2, 0).is_err());
    }

    proptest! {
        #[test]
        fn f_lies_between_precision_and_recall(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..200)) {
            let r = metrics(&ConfusionMatrix::from_pairs(["n", "s", "r"], pairs.clone()).unwrap());
            prop_assert_eq!(r.samples, pairs.len() as u64);
            for c in &r.classes {
                let (lo, hi) = (c.precision.min(c.recall), c.precision.max(c.recall));
                prop_assert!(c.f_score >= lo - 1e-15 && c.f_score <= hi + 1e-15);
                prop_assert!((0.0..=1.0).contains(&c.f_score));
            }
        }
    }
}
