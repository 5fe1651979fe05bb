//! Central finite-difference validation of the analytic gradients.

use super::model::SequenceClassifier;
use crate::error::Result;

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Denominator floor so parameters with vanishing gradients are compared
/// absolutely rather than relatively.
const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst_parameter: usize,
    pub parameters_checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-6)` maximized over every parameter, where `a`
/// is the backpropagated gradient and `n` the central difference.
pub fn gradient_check(model: &SequenceClassifier, tokens: &[u32], target: usize) -> Result<GradientCheck> {
    gradient_check_with(model, tokens, target, |_| {})
}

/// Like [`gradient_check`], but lets the caller modify the analytic gradient
/// before comparison.
pub fn gradient_check_with(
    model: &SequenceClassifier,
    tokens: &[u32],
    target: usize,
    tamper: impl FnOnce(&mut [f64]),
) -> Result<GradientCheck> {
    let (_, mut analytic) = model.gradient(tokens, target)?;
    tamper(&mut analytic);

    let mut probe = model.clone();
    let mut worst = (0.0, 0);
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + FINITE_DIFFERENCE_STEP;
        let plus = probe.loss(tokens, target)?;
        probe.params_mut()[i] = original - FINITE_DIFFERENCE_STEP;
        let minus = probe.loss(tokens, target)?;
        probe.params_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * FINITE_DIFFERENCE_STEP);
        let denom = a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
        let err = (a - numeric).abs() / denom;
        if err > worst.0 {
            worst = (err, i);
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        parameters_checked: analytic.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{CellActivation, SequenceClassifierConfig};

    fn model(activation: CellActivation, dense: Option<usize>, classes: usize, seed: u64) -> SequenceClassifier {
        let cfg = SequenceClassifierConfig {
            vocab_size: 20,
            sequence_length: 5,
            embedding_dim: 4,
            recurrent_units: 4,
            dense_units: dense,
            output_classes: classes,
            cell_activation: activation,
        };
        SequenceClassifier::new(cfg, seed).unwrap()
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for activation in [CellActivation::Sigmoid, CellActivation::Tanh] {
            for (dense, classes) in [(Some(4), 2), (None, 3), (Some(3), 3)] {
                let m = model(activation, dense, classes, 17);
                let check = gradient_check(&m, &[3, 19, 0, 7, 3], classes - 1).unwrap();
                assert!(check.max_relative_error < 1e-4, "{activation:?} {dense:?}: {check:?}");
            }
        }
    }

    #[test]
    fn flat_task_still_agrees() {
        let m = model(CellActivation::Sigmoid, Some(4), 2, 5);
        let tokens = [1, 2, 0, 0, 0];
        let p = m.forward(&tokens).unwrap();
        let target = if p[0] >= p[1] { 0 } else { 1 };
        let check = gradient_check(&m, &tokens, target).unwrap();
        assert!(check.max_relative_error < 1e-4, "{check:?}");
    }

    #[test]
    fn detects_a_flipped_gradient() {
        let m = model(CellActivation::Sigmoid, Some(4), 2, 3);
        let tokens = [4, 4, 8, 1, 0];
        let (_, g) = m.gradient(&tokens, 1).unwrap();
        let largest = (0..g.len()).max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs())).unwrap();
        let check = gradient_check_with(&m, &tokens, 1, |g| g[largest] = -g[largest]).unwrap();
        assert!(check.max_relative_error > 1e-2);
        assert_eq!(check.worst_parameter, largest);
    }
}
