//! The first-stage bank of one-vs-rest binary classifiers and the feature
//! rows it produces for the second stage.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, Sample};
use crate::error::{Error, Result};
use crate::label::{Class, Label, LabelSpace};
use crate::neural::{
    train, CellActivation, Example, SequenceClassifier, SequenceClassifierConfig, TrainedClassifier, TrainingSchedule,
};
use crate::persist;
use crate::rng::derive_seed;
use crate::vectorizer::{NGramVocabulary, DEFAULT_CAPS, SEQUENCE_LENGTH};

/// Output index of the positive class in every binary classifier.
pub const POSITIVE: usize = 0;
/// Output index of the negative class.
pub const NEGATIVE: usize = 1;

/// One slot of the bank: the class it detects and the n-gram order it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Member {
    pub target: Class,
    pub order: usize,
}

/// Canonical bank order. A three-member bank is the first three entries.
pub const BANK_ORDER: [Member; 5] = [
    Member { target: Class::Neutral, order: 1 },
    Member { target: Class::Sexism, order: 1 },
    Member { target: Class::Racism, order: 1 },
    Member { target: Class::Racism, order: 2 },
    Member { target: Class::Racism, order: 3 },
];

impl Member {
    /// Short name used in file names and CSV headers: `n`, `s`, `r`, `r2`, `r3`.
    pub fn name(self) -> String {
        let base = match self.target {
            Class::Neutral => "n",
            Class::Sexism => "s",
            Class::Racism => "r",
        };
        if self.order == 1 {
            base.to_string()
        } else {
            format!("{base}{}", self.order)
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Members of a bank with `classifiers` entries (3 or 5).
pub fn bank_members(classifiers: usize) -> Result<&'static [Member]> {
    match classifiers {
        3 | 5 => Ok(&BANK_ORDER[..classifiers]),
        c => Err(Error::Config(format!("classifiers: must be 3 or 5, got {c}"))),
    }
}

/// One binarized sample: positive iff the original label is the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryExample {
    pub id: String,
    pub text: String,
    pub positive: bool,
}

fn class_of(sample: &Sample) -> Result<Class> {
    match sample.label {
        Some(Label::Class(c)) => Ok(c),
        Some(other) => Err(Error::Input(format!(
            "sample '{}' has label '{other}', expected a three-class label",
            sample.id
        ))),
        None => Err(Error::Input(format!("sample '{}' is unlabeled", sample.id))),
    }
}

fn require_three_class(corpus: &LabeledCorpus) -> Result<()> {
    if corpus.space() != LabelSpace::ThreeClass {
        return Err(Error::Input("a three-class corpus is required".into()));
    }
    Ok(())
}

pub fn binarize_labels(corpus: &LabeledCorpus, target: Class) -> Result<Vec<BinaryExample>> {
    require_three_class(corpus)?;
    corpus
        .iter()
        .map(|s| {
            Ok(BinaryExample {
                id: s.id.clone(),
                text: s.text.clone(),
                positive: class_of(s)? == target,
            })
        })
        .collect()
}

/// Appends `factor - 1` further copies of every `class` sample, in corpus
/// order, after the original samples. Copies keep their ids.
pub fn replicate_oversample(corpus: &LabeledCorpus, class: Class, factor: usize) -> Result<LabeledCorpus> {
    if factor == 0 {
        return Err(Error::Config("oversampling factor must be at least 1".into()));
    }
    let label = Label::Class(class);
    let members: Vec<&Sample> = corpus.iter().filter(|s| s.label == Some(label)).collect();
    if members.is_empty() {
        return Err(Error::Input(format!("class '{class}' is absent from the corpus")));
    }
    let mut samples = corpus.samples().to_vec();
    for _ in 1..factor {
        samples.extend(members.iter().map(|s| (*s).clone()));
    }
    Ok(LabeledCorpus::from_parts_unchecked(samples, corpus.space()))
}

/// Splits off a validation part of `fraction` of each class, chosen by a
/// seeded shuffle. Both parts keep corpus order.
pub fn split_validation(corpus: &LabeledCorpus, fraction: f64, seed: u64) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("validation_fraction: must lie in (0, 1)".into()));
    }
    let mut by_label: BTreeMap<Option<Label>, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.iter().enumerate() {
        by_label.entry(s.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; corpus.len()];
    for positions in by_label.values_mut() {
        positions.shuffle(&mut rng);
        let mut take = (fraction * positions.len() as f64).round() as usize;
        if take == 0 && positions.len() >= 2 {
            take = 1;
        }
        for &i in &positions[..take.min(positions.len() - 1)] {
            held[i] = true;
        }
    }
    let (fit, validation): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| !held[i]);
    if validation.is_empty() {
        return Err(Error::Input("corpus too small to hold out a validation part".into()));
    }
    Ok((corpus.select(&fit), corpus.select(&validation)))
}

/// Layer sizes of every first-stage classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkShape {
    pub embedding_dim: usize,
    pub recurrent_units: usize,
    pub dense_units: Option<usize>,
    pub cell_activation: CellActivation,
}

impl Default for NetworkShape {
    fn default() -> Self {
        let c = SequenceClassifierConfig::first_stage(1);
        NetworkShape {
            embedding_dim: c.embedding_dim,
            recurrent_units: c.recurrent_units,
            dense_units: c.dense_units,
            cell_activation: c.cell_activation,
        }
    }
}

impl NetworkShape {
    fn config(&self, vocab_size: usize) -> SequenceClassifierConfig {
        SequenceClassifierConfig {
            vocab_size,
            sequence_length: SEQUENCE_LENGTH,
            embedding_dim: self.embedding_dim,
            recurrent_units: self.recurrent_units,
            dense_units: self.dense_units,
            output_classes: 2,
            cell_activation: self.cell_activation,
        }
    }
}

/// Per-member training schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemberSchedules {
    pub neutral: TrainingSchedule,
    pub sexism: TrainingSchedule,
    pub racism: TrainingSchedule,
    pub racism_bigram: TrainingSchedule,
    pub racism_trigram: TrainingSchedule,
}

impl Default for MemberSchedules {
    fn default() -> Self {
        MemberSchedules {
            neutral: TrainingSchedule::new(0.08, 0.15),
            sexism: TrainingSchedule::new(0.10, 0.20),
            racism: TrainingSchedule::new(0.08, 0.15),
            racism_bigram: TrainingSchedule::new(0.05, 0.20),
            racism_trigram: TrainingSchedule::new(0.05, 0.18),
        }
    }
}

impl MemberSchedules {
    pub fn get(&self, member: Member) -> &TrainingSchedule {
        match (member.target, member.order) {
            (Class::Neutral, _) => &self.neutral,
            (Class::Sexism, _) => &self.sexism,
            (Class::Racism, 2) => &self.racism_bigram,
            (Class::Racism, 3) => &self.racism_trigram,
            (Class::Racism, _) => &self.racism,
        }
    }

    /// Applies `f` to every schedule.
    pub fn map(&self, f: impl Fn(&TrainingSchedule) -> TrainingSchedule) -> Self {
        MemberSchedules {
            neutral: f(&self.neutral),
            sexism: f(&self.sexism),
            racism: f(&self.racism),
            racism_bigram: f(&self.racism_bigram),
            racism_trigram: f(&self.racism_trigram),
        }
    }
}

/// Replication factors applied to training data before fitting the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Oversampling {
    pub sexism: usize,
    pub racism: usize,
}

impl Default for Oversampling {
    fn default() -> Self {
        Oversampling { sexism: 2, racism: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageOneConfig {
    /// Bank size, 3 or 5.
    pub classifiers: usize,
    /// Vocabulary caps for unigrams, bigrams and trigrams.
    pub caps: [usize; 3],
    pub network: NetworkShape,
    pub schedules: MemberSchedules,
    pub oversampling: Oversampling,
    /// Share of each training fold held out for checkpoint selection.
    pub validation_fraction: f64,
}

impl Default for StageOneConfig {
    fn default() -> Self {
        StageOneConfig {
            classifiers: 5,
            caps: DEFAULT_CAPS,
            network: NetworkShape::default(),
            schedules: MemberSchedules::default(),
            oversampling: Oversampling::default(),
            validation_fraction: 0.1,
        }
    }
}

impl StageOneConfig {
    pub fn validate(&self) -> Result<()> {
        bank_members(self.classifiers)?;
        if self.caps.contains(&0) {
            return Err(Error::Config("caps: every cap must be positive".into()));
        }
        if self.oversampling.sexism == 0 || self.oversampling.racism == 0 {
            return Err(Error::Config("oversampling: factors must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction: must lie in (0, 1)".into()));
        }
        self.network.config(2).validate()?;
        for m in &BANK_ORDER {
            self.schedules.get(*m).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankClassifier {
    pub member: Member,
    pub classifier: TrainedClassifier,
}

/// A trained bank with the vocabularies its members read.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrBank {
    members: Vec<BankClassifier>,
    vocabularies: Vec<NGramVocabulary>,
}

impl OvrBank {
    /// Assembles a bank, checking member order and vocabulary coverage.
    pub fn new(members: Vec<BankClassifier>, vocabularies: Vec<NGramVocabulary>) -> Result<Self> {
        let expected = bank_members(members.len())?;
        for (m, e) in members.iter().zip(expected) {
            if m.member != *e {
                return Err(Error::Input(format!(
                    "bank member '{}' found where '{}' was expected",
                    m.member, e
                )));
            }
        }
        let bank = OvrBank { members, vocabularies };
        for m in &bank.members {
            let vocab = bank.vocabulary(m.member.order)?;
            if m.classifier.model.config().vocab_size != vocab.input_dim() {
                return Err(Error::Input(format!(
                    "classifier '{}' expects {} inputs but its vocabulary provides {}",
                    m.member,
                    m.classifier.model.config().vocab_size,
                    vocab.input_dim()
                )));
            }
        }
        Ok(bank)
    }

    pub fn members(&self) -> &[BankClassifier] {
        &self.members
    }

    pub fn vocabularies(&self) -> &[NGramVocabulary] {
        &self.vocabularies
    }

    pub fn classifiers(&self) -> usize {
        self.members.len()
    }

    /// Width of an unlabeled feature row, `2c`.
    pub fn feature_width(&self) -> usize {
        2 * self.members.len()
    }

    pub fn vocabulary(&self, order: usize) -> Result<&NGramVocabulary> {
        self.vocabularies
            .iter()
            .find(|v| v.order() == order)
            .ok_or_else(|| Error::Input(format!("bank has no vocabulary of order {order}")))
    }

    /// Runs every member on `text` and concatenates the `(p, 1 - p)` pairs.
    pub fn predict_text(&self, text: &str) -> Result<StageOneFeatures> {
        let tokens = crate::corpus::tokenize(text);
        let mut encoded: [Option<Vec<u32>>; 3] = [None, None, None];
        let mut values = Vec::with_capacity(self.feature_width());
        for m in &self.members {
            if m.classifier.report.epochs_run == 0 {
                return Err(Error::Input(format!("classifier '{}' is untrained", m.member)));
            }
            let order = m.member.order;
            if encoded[order - 1].is_none() {
                encoded[order - 1] = Some(self.vocabulary(order)?.encode(&tokens).indices.to_vec());
            }
            let probs = m.classifier.model.forward(encoded[order - 1].as_ref().unwrap())?;
            let p = probs[POSITIVE];
            values.push(p);
            values.push(1.0 - p);
        }
        Ok(StageOneFeatures { values })
    }

    pub fn predict(&self, sample: &Sample) -> Result<StageOneFeatures> {
        self.predict_text(&sample.text)
    }

    /// Predicts every sample of `corpus` in parallel, in corpus order.
    pub fn predict_corpus(&self, corpus: &LabeledCorpus) -> Result<Vec<StageOneFeatures>> {
        corpus.samples().par_iter().map(|s| self.predict(s)).collect()
    }

    /// Writes the bank as a directory: `manifest.json`, one container per
    /// member and one vocabulary per order.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = BankManifest {
            members: Vec::new(),
            vocabularies: Vec::new(),
        };
        for v in &self.vocabularies {
            let file = format!("vocab-{}.jsonl", v.order());
            v.save(&dir.join(&file))?;
            manifest.vocabularies.push(VocabularyRef { order: v.order(), file });
        }
        for m in &self.members {
            let file = format!("classifier-{}.json", m.member.name());
            m.classifier.save(&dir.join(&file))?;
            manifest.members.push(MemberRef {
                target: m.member.target,
                order: m.member.order,
                file,
            });
        }
        persist::write_versioned(&dir.join(MANIFEST_FILE), BANK_FORMAT, BANK_VERSION, &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: BankManifest = persist::read_versioned(&dir.join(MANIFEST_FILE), BANK_FORMAT, BANK_VERSION)?;
        let vocabularies = manifest
            .vocabularies
            .iter()
            .map(|v| {
                let vocab = NGramVocabulary::load(&dir.join(&v.file))?;
                if vocab.order() != v.order {
                    return Err(Error::Input(format!("{}: order {} != manifest order {}", v.file, vocab.order(), v.order)));
                }
                Ok(vocab)
            })
            .collect::<Result<Vec<_>>>()?;
        let members = manifest
            .members
            .iter()
            .map(|m| {
                Ok(BankClassifier {
                    member: Member {
                        target: m.target,
                        order: m.order,
                    },
                    classifier: TrainedClassifier::load(&dir.join(&m.file))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        OvrBank::new(members, vocabularies)
    }
}

pub const BANK_FORMAT: &str = "ovr-bank";
pub const BANK_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct BankManifest {
    /// In bank order.
    members: Vec<MemberRef>,
    vocabularies: Vec<VocabularyRef>,
}

#[derive(Serialize, Deserialize)]
struct MemberRef {
    target: Class,
    order: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRef {
    order: usize,
    file: String,
}

/// Trains a bank on `fit`, selecting checkpoints on `validation`.
///
/// Vocabularies are built from `fit` before oversampling; oversampling is
/// applied to `fit` only. Members train concurrently, each from its own
/// seed stream.
pub fn train_bank(fit: &LabeledCorpus, validation: &LabeledCorpus, config: &StageOneConfig, seed: u64) -> Result<OvrBank> {
    config.validate()?;
    require_three_class(fit)?;
    require_three_class(validation)?;
    let members = bank_members(config.classifiers)?;

    let mut replicated = fit.clone();
    for (class, factor) in [
        (Class::Sexism, config.oversampling.sexism),
        (Class::Racism, config.oversampling.racism),
    ] {
        if factor > 1 {
            replicated = replicate_oversample(&replicated, class, factor)?;
        }
    }
    let fit_classes = replicated.iter().map(class_of).collect::<Result<Vec<_>>>()?;
    let validation_classes = validation.iter().map(class_of).collect::<Result<Vec<_>>>()?;

    let max_order = members.iter().map(|m| m.order).max().unwrap_or(1);
    let vocabularies = (1..=max_order)
        .map(|order| NGramVocabulary::build(fit, order, config.caps[order - 1]))
        .collect::<Result<Vec<_>>>()?;

    let encode = |corpus: &LabeledCorpus, vocab: &NGramVocabulary| -> Vec<Vec<u32>> {
        corpus
            .samples()
            .par_iter()
            .map(|s| vocab.encode_text(&s.text).indices.to_vec())
            .collect()
    };
    let encoded: Vec<(Vec<Vec<u32>>, Vec<Vec<u32>>)> = vocabularies
        .iter()
        .map(|v| (encode(&replicated, v), encode(validation, v)))
        .collect();

    let trained = members
        .par_iter()
        .enumerate()
        .map(|(i, &member)| {
            let (fit_tokens, validation_tokens) = &encoded[member.order - 1];
            let examples = |tokens: &[Vec<u32>], classes: &[Class]| -> Vec<Example> {
                tokens
                    .iter()
                    .zip(classes)
                    .map(|(t, &c)| Example::new(t.clone(), if c == member.target { POSITIVE } else { NEGATIVE }))
                    .collect()
            };
            let train_set = examples(fit_tokens, &fit_classes);
            let validation_set = examples(validation_tokens, &validation_classes);
            let vocab = &vocabularies[member.order - 1];
            let model = SequenceClassifier::new(config.network.config(vocab.input_dim()), derive_seed(seed, 2 * i as u64))?;
            let classifier = train(
                model,
                &train_set,
                &validation_set,
                config.schedules.get(member),
                derive_seed(seed, 2 * i as u64 + 1),
            )?;
            Ok(BankClassifier { member, classifier })
        })
        .collect::<Result<Vec<_>>>()?;

    OvrBank::new(trained, vocabularies)
}

/// Concatenated `(p, 1 - p)` pairs of a bank, in bank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneFeatures {
    values: Vec<f64>,
}

impl StageOneFeatures {
    /// Validates an even, non-zero width, values in `[0, 1]` and complementary pairs.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() % 2 != 0 {
            return Err(Error::Input(format!("feature width {} is not a positive even number", values.len())));
        }
        for pair in values.chunks(2) {
            if !pair.iter().all(|v| (0.0..=1.0).contains(v)) || (pair[0] + pair[1] - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!("({}, {}) is not a probability pair", pair[0], pair[1])));
            }
        }
        Ok(StageOneFeatures { values })
    }

    /// Builds a row from positive-class probabilities alone.
    pub fn from_positive(probabilities: &[f64]) -> Result<Self> {
        Self::new(probabilities.iter().flat_map(|&p| [p, 1.0 - p]).collect())
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        StageOneFeatures { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn classifiers(&self) -> usize {
        self.values.len() / 2
    }

    /// Positive-class probability of member `i`.
    pub fn positive(&self, i: usize) -> f64 {
        self.values[2 * i]
    }

    pub fn positives(&self) -> Vec<f64> {
        self.values.iter().step_by(2).copied().collect()
    }
}

/// A feature row with its class attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatures {
    pub features: StageOneFeatures,
    pub label: Class,
}

impl LabeledFeatures {
    /// The `2c + 3` tuple `(p_1, ¬p_1, ..., B_S, B_R, B_N)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.features.values.clone();
        v.extend(self.label.one_hot());
        v
    }

    pub fn from_slice(row: &[f64]) -> Result<Self> {
        if row.len() < 5 {
            return Err(Error::Input(format!("labeled row of width {} is too short", row.len())));
        }
        let (features, tail) = row.split_at(row.len() - 3);
        let label = Class::from_one_hot([tail[0], tail[1], tail[2]])
            .ok_or_else(|| Error::Input(format!("label triple {tail:?} is not one-hot")))?;
        Ok(LabeledFeatures {
            features: StageOneFeatures::new(features.to_vec())?,
            label,
        })
    }
}

pub fn attach_label(features: &StageOneFeatures, label: Label) -> Result<LabeledFeatures> {
    match label {
        Label::Class(c) => Ok(LabeledFeatures {
            features: features.clone(),
            label: c,
        }),
        other => Err(Error::Input(format!("label '{other}' is outside the three-class space"))),
    }
}

/// A feature row as stored in CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: StageOneFeatures,
    pub label: Option<Class>,
}

impl FeatureRow {
    pub fn labeled(&self) -> Option<LabeledFeatures> {
        self.label.map(|label| LabeledFeatures {
            features: self.features.clone(),
            label,
        })
    }
}

/// CSV header for a bank of `classifiers` members, with or without the
/// label triple.
pub fn feature_header(classifiers: usize, labeled: bool) -> Result<Vec<String>> {
    let mut header = vec!["id".to_string()];
    for m in bank_members(classifiers)? {
        header.push(format!("p_{}", m.name()));
        header.push(format!("not_p_{}", m.name()));
    }
    if labeled {
        header.extend(["b_s", "b_r", "b_n"].map(String::from));
    }
    Ok(header)
}

/// Serializes rows that all share one width and are all labeled or all
/// unlabeled.
pub fn write_features_string(rows: &[FeatureRow]) -> Result<String> {
    let first = rows.first().ok_or_else(|| Error::Input("no feature rows to write".into()))?;
    let labeled = first.label.is_some();
    let header = feature_header(first.features.classifiers(), labeled)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        if row.features.width() != first.features.width() {
            return Err(Error::WidthMismatch {
                expected: first.features.width(),
                actual: row.features.width(),
            });
        }
        if row.label.is_some() != labeled {
            return Err(Error::Input("rows mix labeled and unlabeled features".into()));
        }
        let mut record = vec![row.id.clone()];
        record.extend(row.features.values.iter().map(|v| v.to_string()));
        if let Some(c) = row.label {
            record.extend(c.one_hot().iter().map(|v| v.to_string()));
        }
        w.write_record(&record)?;
    }
    w.into_inner()
        .map_err(|e| Error::Input(format!("writing features: {e}")))
        .map(|b| String::from_utf8(b).expect("csv output is utf-8"))
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    persist::write_atomic(path, write_features_string(rows)?.as_bytes())
}

pub fn parse_features(content: &str) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(content.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let labeled = header.last().map(String::as_str) == Some("b_n");
    let width = header.len() - 1 - if labeled { 3 } else { 0 };
    if width % 2 != 0 || feature_header(width / 2, labeled)? != header {
        return Err(Error::Malformed {
            line: 1,
            message: format!("unrecognized feature header: {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Malformed { line, message };
        if record.len() != header.len() {
            return Err(bad(format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("'{f}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (features, label) = if labeled {
            let l = LabeledFeatures::from_slice(&values).map_err(|e| bad(e.to_string()))?;
            (l.features, Some(l.label))
        } else {
            (StageOneFeatures::new(values).map_err(|e| bad(e.to_string()))?, None)
        };
        rows.push(FeatureRow {
            id: record[0].to_string(),
            features,
            label,
        });
    }
    Ok(rows)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    parse_features(&persist::read_to_string(path)?)
}
