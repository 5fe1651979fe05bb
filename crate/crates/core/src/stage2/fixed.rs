//! Closed-form argmax rules over first-stage probabilities.

use crate::error::{Error, Result};
use crate::label::Class;
use crate::stage1::StageOneFeatures;

/// Index of the largest score; ties go to the lowest index, which is the
/// Neutral, Sexism, Racism preference.
pub fn argmax_class(scores: [f64; 3]) -> Class {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Class::from_index(best).expect("index below 3")
}

fn require_width(features: &StageOneFeatures, expected: usize) -> Result<()> {
    if features.width() != expected {
        return Err(Error::WidthMismatch {
            expected,
            actual: features.width(),
        });
    }
    Ok(())
}

/// `argmax(p_N, p_S, p_R)` over a three-member bank row.
pub fn fixed_criteria_unigram(features: &StageOneFeatures) -> Result<Class> {
    require_width(features, 6)?;
    Ok(argmax_class([features.positive(0), features.positive(1), features.positive(2)]))
}

/// `argmax(p_N, p_S, mean(p_R, p_R2, p_R3))` over a five-member bank row.
pub fn fixed_criteria_ngram(features: &StageOneFeatures) -> Result<Class> {
    require_width(features, 10)?;
    let r = features.positive(2);
    // Written relative to p_R so equal inputs give exactly p_R.
    let racism = r + ((features.positive(3) - r) + (features.positive(4) - r)) / 3.0;
    Ok(argmax_class([features.positive(0), features.positive(1), racism]))
}
