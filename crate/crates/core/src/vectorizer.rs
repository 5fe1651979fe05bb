//! Frequency-ranked n-gram vocabularies and fixed-length index encodings.
//!
//! Index 0 is reserved for padding and out-of-vocabulary n-grams; known
//! n-grams receive dense indices `1..=len` in descending corpus frequency,
//! ties broken by first occurrence.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, LabeledCorpus, TOKENIZER_VERSION};
use crate::error::{Error, Result};
use crate::persist;

/// Number of elements in every encoded sample.
pub const SEQUENCE_LENGTH: usize = 30;

/// Default vocabulary caps for unigram, bigram and trigram orders.
pub const DEFAULT_CAPS: [usize; 3] = [25_000, 120_000, 180_000];

pub fn default_cap(order: usize) -> usize {
    DEFAULT_CAPS[order.clamp(1, 3) - 1]
}

/// Contiguous word n-grams of `tokens`, joined with a single space.
pub fn ngrams(tokens: &[String], order: usize) -> Vec<String> {
    if order == 0 || tokens.len() < order {
        return Vec::new();
    }
    tokens.windows(order).map(|w| w.join(" ")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramVocabulary {
    order: usize,
    cap: usize,
    /// Entry `i` holds the n-gram with index `i + 1` and its frequency.
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl NGramVocabulary {
    pub fn build(corpus: &LabeledCorpus, order: usize, cap: usize) -> Result<Self> {
        Self::build_from_texts(corpus.iter().map(|s| s.text.as_str()), order, cap)
    }

    pub fn build_from_texts<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        order: usize,
        cap: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::Config(format!("order: must be 1, 2 or 3, got {order}")));
        }
        if cap == 0 {
            return Err(Error::Config("cap: must be at least 1".into()));
        }

        // n-gram -> (count, first occurrence)
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        let mut position = 0usize;
        let mut any_text = false;
        for text in texts {
            any_text = true;
            for gram in ngrams(&tokenize(text), order) {
                let entry = counts.entry(gram).or_insert((0, position));
                entry.0 += 1;
                position += 1;
            }
        }
        if !any_text {
            return Err(Error::Input("cannot build a vocabulary from an empty corpus".into()));
        }

        let mut ranked: Vec<(String, u64, usize)> =
            counts.into_iter().map(|(g, (c, first))| (g, c, first)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(cap);

        let entries: Vec<(String, u64)> = ranked.into_iter().map(|(g, c, _)| (g, c)).collect();
        Ok(Self::from_entries(order, cap, entries))
    }

    fn from_entries(order: usize, cap: usize, entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (g, _))| (g.clone(), i as u32 + 1))
            .collect();
        NGramVocabulary {
            order,
            cap,
            entries,
            index,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of indexed n-grams, at most `cap`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Embedding input dimension needed to accept every index this vocabulary emits.
    pub fn input_dim(&self) -> usize {
        self.entries.len() + 1
    }

    /// Index of `gram`, or 0 when it is not in the vocabulary.
    pub fn index_of(&self, gram: &str) -> u32 {
        self.index.get(gram).copied().unwrap_or(0)
    }

    pub fn frequency(&self, index: u32) -> Option<u64> {
        let i = (index as usize).checked_sub(1)?;
        self.entries.get(i).map(|(_, c)| *c)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u32, u64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (g, c))| (g.as_str(), i as u32 + 1, *c))
    }

    pub fn encode(&self, tokens: &[String]) -> EncodedSample {
        let mut indices = [0u32; SEQUENCE_LENGTH];
        for (slot, gram) in indices.iter_mut().zip(ngrams(tokens, self.order)) {
            *slot = self.index_of(&gram);
        }
        EncodedSample {
            order: self.order,
            indices,
        }
    }

    pub fn encode_text(&self, text: &str) -> EncodedSample {
        self.encode(&tokenize(text))
    }

    /// JSON-lines: a header line with order/cap/tokenizer version, then one
    /// `{"ngram", "index", "frequency"}` object per entry in index order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = VocabHeader {
            order: self.order,
            cap: self.cap,
            tokenizer_version: TOKENIZER_VERSION,
        };
        let io = |e| Error::Input(format!("writing vocabulary: {e}"));
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for (ngram, index, frequency) in self.entries() {
            serde_json::to_writer(
                &mut w,
                &VocabEntry {
                    ngram: ngram.to_string(),
                    index,
                    frequency,
                },
            )?;
            w.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header: VocabHeader = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::Input(e.to_string()))?;
                serde_json::from_str(&line).map_err(|e| Error::Malformed {
                    line: 1,
                    message: format!("vocabulary header: {e}"),
                })?
            }
            None => return Err(Error::Malformed { line: 1, message: "empty vocabulary file".into() }),
        };
        if header.tokenizer_version != TOKENIZER_VERSION {
            return Err(Error::VersionMismatch {
                found: header.tokenizer_version,
                expected: TOKENIZER_VERSION,
            });
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::Input(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i as u64 + 1;
            let e: VocabEntry = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            if e.index as usize != entries.len() + 1 {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("expected index {}, found {}", entries.len() + 1, e.index),
                });
            }
            entries.push((e.ngram, e.frequency));
        }
        if entries.len() > header.cap {
            return Err(Error::Input(format!(
                "vocabulary has {} entries but cap {}",
                entries.len(),
                header.cap
            )));
        }
        Ok(Self::from_entries(header.order, header.cap, entries))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        persist::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct VocabHeader {
    order: usize,
    cap: usize,
    tokenizer_version: u32,
}

#[derive(Serialize, Deserialize)]
struct VocabEntry {
    ngram: String,
    index: u32,
    frequency: u64,
}

/// A sample encoded at one n-gram order: exactly [`SEQUENCE_LENGTH`] indices,
/// truncated or zero-padded at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedSample {
    pub order: usize,
    pub indices: [u32; SEQUENCE_LENGTH],
}

impl EncodedSample {
    pub fn as_slice(&self) -> &[u32] {
        &self.indices
    }
}
