//! Binary hate / non-hate adapters over a three-class bank, for testing on
//! corpora labeled in a different scheme.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionMatrix, MetricsReport};
use crate::corpus::{filter_text, LabeledCorpus};
use crate::error::{Error, Result};
use crate::label::{BinaryClass, Label, LabelSpace};
use crate::stage1::{OvrBank, StageOneFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// Hate iff `p_N < 0.5`.
    Single,
    /// Hate iff `p_N < max(p_S, p_R)`.
    Three,
    /// Hate iff `p_N < max(p_S, p_R, p_R2, p_R3)`; needs a five-member bank.
    Five,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Single, Rule::Three, Rule::Five];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Single => "single",
            Rule::Three => "three",
            Rule::Five => "five",
        }
    }

    /// Smallest bank the rule can read.
    pub fn min_classifiers(self) -> usize {
        match self {
            Rule::Single => 1,
            Rule::Three => 3,
            Rule::Five => 5,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("rule: expected single, three or five, got '{s}'")))
    }
}

/// Applies `rule` to positive probabilities in bank order
/// (`p_N, p_S, p_R, p_R2, p_R3`). Equality maps to non-hate.
pub fn rule_decision(rule: Rule, positives: &[f64]) -> Result<BinaryClass> {
    if positives.len() < rule.min_classifiers() {
        return Err(Error::Input(format!(
            "rule {rule} needs {} classifier outputs, got {}",
            rule.min_classifiers(),
            positives.len()
        )));
    }
    let comparator = match rule {
        Rule::Single => 0.5,
        Rule::Three => positives[1].max(positives[2]),
        Rule::Five => positives[1..5].iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(if positives[0] < comparator {
        BinaryClass::Hate
    } else {
        BinaryClass::NonHate
    })
}

pub fn classify(rule: Rule, features: &StageOneFeatures) -> Result<BinaryClass> {
    rule_decision(rule, &features.positives())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub rule: Rule,
    pub filtered: bool,
    pub classifiers: usize,
    pub metrics: MetricsReport,
}

/// Scores `bank` on a binary-labeled corpus. With `filtered`, every text is
/// cleaned by [`filter_text`] first.
pub fn generalize(bank: &OvrBank, test: &LabeledCorpus, rule: Rule, filtered: bool) -> Result<GeneralizationReport> {
    if bank.classifiers() < rule.min_classifiers() {
        return Err(Error::Config(format!(
            "rule: '{rule}' needs a {}-member bank, this one has {}",
            rule.min_classifiers(),
            bank.classifiers()
        )));
    }
    if test.space() != LabelSpace::Binary {
        return Err(Error::Input("generalization needs a corpus labeled hate / non-hate".into()));
    }
    let gold = test
        .iter()
        .map(|s| match s.label {
            Some(Label::Binary(b)) => Ok(b),
            _ => Err(Error::Input(format!("sample '{}' lacks a binary label", s.id))),
        })
        .collect::<Result<Vec<_>>>()?;
    let cleaned;
    let test = if filtered {
        cleaned = test.map_text(filter_text);
        &cleaned
    } else {
        test
    };
    let features = bank.predict_corpus(test)?;
    let predicted = features.iter().map(|f| classify(rule, f)).collect::<Result<Vec<_>>>()?;
    let cm = ConfusionMatrix::from_pairs(
        BinaryClass::ALL.map(BinaryClass::as_str),
        gold.iter().zip(&predicted).map(|(g, p)| (g.index(), p.index())),
    )?;
    Ok(GeneralizationReport {
        rule,
        filtered,
        classifiers: bank.classifiers(),
        metrics: metrics(&cm),
    })
}
