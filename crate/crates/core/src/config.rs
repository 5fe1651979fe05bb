//! The JSON run configuration read by the command-line tool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, CorpusFormat, LabeledCorpus};
use crate::error::{Error, Result};
use crate::eval::{ExperimentConfig, Rule};
use crate::label::LabelMap;
use crate::persist::read_to_string;

/// Every field has a default; a config file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Three-class corpus for training and cross-validation.
    pub data: Option<PathBuf>,
    /// Binary-labeled corpus for generalization.
    pub test_data: Option<PathBuf>,
    /// Corpus format; guessed from the extension when absent.
    pub format: Option<CorpusFormat>,
    pub labels: LabelMap,
    pub experiment: ExperimentConfig,
    pub rule: Rule,
    pub filtered: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            test_data: None,
            format: None,
            labels: LabelMap::default(),
            experiment: ExperimentConfig::default(),
            rule: Rule::Three,
            filtered: false,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        for (field, path) in [("data", &self.data), ("test_data", &self.test_data)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::Config(format!("{field}: '{}' does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Format for `path`: the configured one, else the extension's.
    pub fn format_for(&self, path: &Path) -> Result<CorpusFormat> {
        self.format
            .or_else(|| CorpusFormat::from_path(path))
            .ok_or_else(|| Error::Config(format!("format: cannot tell the format of '{}'; pass one", path.display())))
    }

    pub fn load_corpus(&self, path: &Path) -> Result<LabeledCorpus> {
        load_corpus(path, self.format_for(path)?, &self.labels)
    }

    /// Loads the corpus named by `field`, which must be set.
    pub fn require(&self, field: &str) -> Result<LabeledCorpus> {
        let path = match field {
            "data" => &self.data,
            "test_data" => &self.test_data,
            other => return Err(Error::Config(format!("{other}: not a corpus field"))),
        };
        let path = path.as_ref().ok_or_else(|| Error::Config(format!("{field}: no corpus given")))?;
        self.load_corpus(path)
    }
}
