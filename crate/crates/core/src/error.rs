use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    TsFormat { line: usize, msg: String },

    #[error("physionet record {record}: {msg}")]
    PhysioNet { record: String, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("imputation failed: {0}")]
    Impute(String),

    #[error("tensor file {path}: {msg}")]
    TensorFile { path: PathBuf, msg: String },

    #[error("cache entry {path} is corrupt: {msg}")]
    CacheCorrupt { path: PathBuf, msg: String },

    #[error("missing source files: {0}")]
    MissingSources(String),

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn ts(line: usize, msg: impl Into<String>) -> Self {
        Error::TsFormat { line, msg: msg.into() }
    }

    pub(crate) fn physionet(record: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::PhysioNet { record: record.into(), msg: msg.into() }
    }

    pub(crate) fn in_step(self, step: &'static str) -> Self {
        Error::Step { step, source: Box::new(self) }
    }

    /// True when the error stems from user input (bad flags or config) rather
    /// than a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Step { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
