use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("degenerate feature `{0}`: all observed values are equal")]
    DegenerateFeature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("prediction failed for task `{task}`, feature `{feature}`, bin {bin}, sample {sample}: {reason}")]
    Prediction {
        task: String,
        feature: String,
        bin: usize,
        sample: usize,
        reason: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line driver: 2 for bad input, 3 for
    /// numerical failures, 1 for anything else (I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Prediction { .. } => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}
