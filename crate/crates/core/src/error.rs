use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Judge,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("dangling reference to `{key}` from {referrer}")]
    DanglingReference { key: String, referrer: String },
    #[error("malformed media id `{id}`: {reason}")]
    MalformedMediaId { id: String, reason: String },
    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: String,
        value: String,
        allowed: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("quantizer is untrained")]
    Untrained,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("judge transport error: {0}")]
    JudgeTransport(String),
    #[error("no cassette entry for request key {0}")]
    CassetteMiss(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            return Error::MissingFile(path);
        }
        Error::Io { path, source }
    }

    pub fn out_of_range(what: &str, value: impl ToString, allowed: &str) -> Self {
        Error::OutOfRange {
            what: what.to_string(),
            value: value.to_string(),
            allowed: allowed.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::JudgeTransport(_) | Error::CassetteMiss(_) => ErrorKind::Judge,
            _ => ErrorKind::Data,
        }
    }
}
