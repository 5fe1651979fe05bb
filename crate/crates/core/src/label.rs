//! Class labels and the string normalization table used when loading corpora.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three classes of the source task.
///
/// Variant order is the tie-breaking preference used by every argmax in the
/// crate: Neutral, then Sexism, then Racism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Neutral,
    Sexism,
    Racism,
}

impl Class {
    /// All classes in tie-breaking order.
    pub const ALL: [Class; 3] = [Class::Neutral, Class::Sexism, Class::Racism];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Class> {
        Class::ALL.get(index).copied()
    }

    /// One-hot label triple `(B_S, B_R, B_N)` attached to second-stage rows.
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            Class::Sexism => [1.0, 0.0, 0.0],
            Class::Racism => [0.0, 1.0, 0.0],
            Class::Neutral => [0.0, 0.0, 1.0],
        }
    }

    /// Inverse of [`Class::one_hot`]; `None` unless the triple is exactly one-hot.
    pub fn from_one_hot(triple: [f64; 3]) -> Option<Class> {
        match triple {
            [1.0, 0.0, 0.0] => Some(Class::Sexism),
            [0.0, 1.0, 0.0] => Some(Class::Racism),
            [0.0, 0.0, 1.0] => Some(Class::Neutral),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Neutral => "neutral",
            Class::Sexism => "sexism",
            Class::Racism => "racism",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neutral" => Ok(Class::Neutral),
            "sexism" => Ok(Class::Sexism),
            "racism" => Ok(Class::Racism),
            other => Err(Error::Input(format!("unknown class '{other}'"))),
        }
    }
}

/// Binary labels of the cross-dataset test corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryClass {
    Hate,
    NonHate,
}

impl BinaryClass {
    pub const ALL: [BinaryClass; 2] = [BinaryClass::Hate, BinaryClass::NonHate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryClass::Hate => "hate",
            BinaryClass::NonHate => "nonhate",
        }
    }
}

impl fmt::Display for BinaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(Class),
    Binary(BinaryClass),
}

impl Label {
    pub fn space(self) -> LabelSpace {
        match self {
            Label::Class(_) => LabelSpace::ThreeClass,
            Label::Binary(_) => LabelSpace::Binary,
        }
    }

    pub fn as_class(self) -> Option<Class> {
        match self {
            Label::Class(c) => Some(c),
            Label::Binary(_) => None,
        }
    }

    pub fn as_binary(self) -> Option<BinaryClass> {
        match self {
            Label::Binary(b) => Some(b),
            Label::Class(_) => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Class(c) => c.as_str(),
            Label::Binary(b) => b.as_str(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The admissible class set of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpace {
    ThreeClass,
    Binary,
}

impl LabelSpace {
    pub fn labels(self) -> Vec<Label> {
        match self {
            LabelSpace::ThreeClass => Class::ALL.iter().map(|&c| Label::Class(c)).collect(),
            LabelSpace::Binary => BinaryClass::ALL.iter().map(|&b| Label::Binary(b)).collect(),
        }
    }
}

/// Case-insensitive mapping from raw label strings to labels.
///
/// The default table accepts the strings used by the Waseem-style three-class
/// corpus (`sexism`, `racism`, `none`) and by the SemEval-style binary corpus
/// (`OFF`/`NOT`, `HOF`/`NOT`, `hate`/`nonhate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap {
    entries: BTreeMap<String, Label>,
}

impl LabelMap {
    pub fn empty() -> Self {
        LabelMap {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, raw: &str, label: Label) {
        self.entries.insert(raw.trim().to_lowercase(), label);
    }

    pub fn lookup(&self, raw: &str) -> Option<Label> {
        self.entries.get(&raw.trim().to_lowercase()).copied()
    }
}

impl Default for LabelMap {
    fn default() -> Self {
        let mut map = LabelMap::empty();
        for raw in ["sexism", "sexist"] {
            map.insert(raw, Label::Class(Class::Sexism));
        }
        for raw in ["racism", "racist"] {
            map.insert(raw, Label::Class(Class::Racism));
        }
        for raw in ["none", "neutral"] {
            map.insert(raw, Label::Class(Class::Neutral));
        }
        for raw in ["hate", "hateful", "off", "hof"] {
            map.insert(raw, Label::Binary(BinaryClass::Hate));
        }
        for raw in ["nonhate", "non-hate", "not", "nothate"] {
            map.insert(raw, Label::Binary(BinaryClass::NonHate));
        }
        map
    }
}
