use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of failures, used by the command line to choose an
/// exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("unknown label '{label}' at line {line}")]
    UnknownLabel { label: String, line: u64 },

    #[error("duplicate sample id '{id}' at line {line}")]
    DuplicateId { id: String, line: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("token index {index} out of range for vocabulary of size {vocab_size}")]
    IndexOutOfRange { index: u32, vocab_size: usize },

    #[error("expected feature width {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error("container version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("fold {fold}, repetition {repetition}: {source}")]
    Fold {
        fold: usize,
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::VersionMismatch { .. } => ErrorKind::Usage,
            Error::NonFinite { .. } => ErrorKind::Numeric,
            Error::Fold { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
