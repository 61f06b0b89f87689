use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("batch too small: {rows} rows (effective {n_effective}) cannot support an order-{order} estimate")]
    BatchTooSmall {
        rows: usize,
        n_effective: usize,
        order: usize,
    },

    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("dataset has a single class")]
    SingleClass,

    #[error("empty subset")]
    EmptySubset,

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::BatchTooSmall { .. } => ErrorKind::Config,
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Data(_)
            | Error::SingleClass
            | Error::EmptySubset
            | Error::Serde(_) => ErrorKind::Data,
            Error::Degenerate(_) | Error::NonFinite { .. } => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}
