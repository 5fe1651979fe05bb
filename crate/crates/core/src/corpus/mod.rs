//! Labeled text corpora: loading, saving, tokenization and test-set filtering.

mod filter;
mod tokenize;

pub use filter::{filter_text, filter_text_with, FilterConfig};
pub use tokenize::{tokenize, TOKENIZER_VERSION};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, LabelMap, LabelSpace};
use crate::persist;

/// One text posting with an optional gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Sample {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

/// An ordered, immutable collection of samples over one label space.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    samples: Vec<Sample>,
    space: LabelSpace,
}

impl LabeledCorpus {
    /// Builds a corpus, checking id uniqueness and label-space membership.
    pub fn new(samples: Vec<Sample>, space: LabelSpace) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: s.id.clone(),
                    line: i as u64 + 1,
                });
            }
            if let Some(label) = s.label {
                if label.space() != space {
                    return Err(Error::Input(format!(
                        "sample '{}' has label '{label}' outside the {space:?} label space",
                        s.id
                    )));
                }
            }
        }
        Ok(LabeledCorpus { samples, space })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Gold label populations, in label-space order.
    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = self
            .space
            .labels()
            .into_iter()
            .map(|l| (l.to_string(), 0))
            .collect();
        for label in self.samples.iter().filter_map(|s| s.label) {
            *counts.entry(label.to_string()).or_default() += 1;
        }
        counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == Some(label)).count()
    }

    /// Sub-corpus formed by the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> LabeledCorpus {
        LabeledCorpus {
            samples: positions.iter().map(|&i| self.samples[i].clone()).collect(),
            space: self.space,
        }
    }

    /// Applies `f` to every text, keeping ids and labels.
    pub fn map_text(&self, f: impl Fn(&str) -> String) -> LabeledCorpus {
        LabeledCorpus {
            samples: self
                .samples
                .iter()
                .map(|s| Sample::new(s.id.clone(), f(&s.text), s.label))
                .collect(),
            space: self.space,
        }
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<Sample>, space: LabelSpace) -> Self {
        LabeledCorpus { samples, space }
    }
}

impl<'a> IntoIterator for &'a LabeledCorpus {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Tsv,
    Csv,
    JsonLines,
}

impl CorpusFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<CorpusFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "tsv" => Some(CorpusFormat::Tsv),
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "ndjson" => Some(CorpusFormat::JsonLines),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "csv" => Ok(CorpusFormat::Csv),
            "json-lines" | "jsonl" | "jsonlines" => Ok(CorpusFormat::JsonLines),
            other => Err(Error::Config(format!("format: unknown corpus format '{other}'"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Tsv => "tsv",
            CorpusFormat::Csv => "csv",
            CorpusFormat::JsonLines => "json-lines",
        })
    }
}

#[derive(Deserialize, Serialize)]
struct JsonRecord {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<String>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat, labels: &LabelMap) -> Result<LabeledCorpus> {
    let content = persist::read_to_string(path)?;
    parse_corpus(&content, format, labels)
}

/// Parses corpus text; line numbers in errors are 1-based file lines.
pub fn parse_corpus(content: &str, format: CorpusFormat, labels: &LabelMap) -> Result<LabeledCorpus> {
    let raw = match format {
        CorpusFormat::JsonLines => parse_json_lines(content)?,
        CorpusFormat::Tsv => parse_delimited(content, b'\t', false)?,
        CorpusFormat::Csv => parse_delimited(content, b',', true)?,
    };

    let mut samples = Vec::with_capacity(raw.len());
    let mut space = None;
    let mut seen = HashSet::with_capacity(raw.len());
    for (line, id, text, label) in raw {
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, line });
        }
        let label = match label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => {
                let l = labels.lookup(s).ok_or_else(|| Error::UnknownLabel {
                    label: s.to_string(),
                    line,
                })?;
                match space {
                    None => space = Some(l.space()),
                    Some(sp) if sp != l.space() => {
                        return Err(Error::Malformed {
                            line,
                            message: format!("label '{s}' mixes binary and three-class label spaces"),
                        })
                    }
                    Some(_) => {}
                }
                Some(l)
            }
        };
        samples.push(Sample { id, text, label });
    }
    Ok(LabeledCorpus::from_parts_unchecked(
        samples,
        space.unwrap_or(LabelSpace::ThreeClass),
    ))
}

type RawRecord = (u64, String, String, Option<String>);

fn parse_json_lines(content: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, rec.id, rec.text, rec.label));
    }
    Ok(out)
}

fn parse_delimited(content: &str, delimiter: u8, quoting: bool) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .quoting(quoting)
        .has_headers(true)
        .from_reader(content.as_bytes());

    let headers = reader.headers().map_err(|e| malformed(&e, 1))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Malformed {
                line: 1,
                message: format!("header has no '{name}' column"),
            })
    };
    let (id_col, text_col, label_col) = (column("id")?, column("text")?, column("label")?);

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        out.push((line, field(id_col), field(text_col), Some(field(label_col))));
    }
    Ok(out)
}

fn malformed(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    Error::Malformed { line, message }
}

/// Serializes a corpus so that [`parse_corpus`] reads back the same
/// `(id, text, label)` triples.
pub fn write_corpus_string(corpus: &LabeledCorpus, format: CorpusFormat) -> Result<String> {
    match format {
        CorpusFormat::JsonLines => {
            let mut out = String::new();
            for s in corpus {
                let rec = JsonRecord {
                    id: s.id.clone(),
                    text: s.text.clone(),
                    label: s.label.map(|l| l.to_string()),
                };
                out.push_str(&serde_json::to_string(&rec)?);
                out.push('\n');
            }
            Ok(out)
        }
        CorpusFormat::Tsv | CorpusFormat::Csv => {
            let tsv = format == CorpusFormat::Tsv;
            let mut writer = csv::WriterBuilder::new()
                .delimiter(if tsv { b'\t' } else { b',' })
                .quote_style(if tsv { csv::QuoteStyle::Never } else { csv::QuoteStyle::Necessary })
                .from_writer(Vec::new());
            writer.write_record(["id", "text", "label"])?;
            for s in corpus {
                if tsv && (s.text.contains(['\t', '\n', '\r']) || s.id.contains(['\t', '\n', '\r'])) {
                    return Err(Error::Input(format!(
                        "sample '{}' contains tab or newline characters and cannot be written as TSV",
                        s.id
                    )));
                }
                let label = s.label.map(|l| l.to_string()).unwrap_or_default();
                writer.write_record([s.id.as_str(), s.text.as_str(), label.as_str()])?;
            }
            let bytes = writer.into_inner().map_err(|e| Error::Input(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
        }
    }
}

pub fn write_corpus(path: &Path, corpus: &LabeledCorpus, format: CorpusFormat) -> Result<()> {
    let s = write_corpus_string(corpus, format)?;
    persist::write_atomic(path, s.as_bytes())
}
