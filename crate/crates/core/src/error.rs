use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point has no coordinates")]
    EmptyPoint,

    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("model has no classifiers")]
    EmptyModel,

    #[error("training set is empty")]
    EmptyTraining,

    #[error("stream is empty")]
    EmptyStream,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stream item {index} carries label {label:?} which was not seen in training")]
    UnknownLabel { index: usize, label: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("ensemble {label:?}: {detail}")]
    SwarmState { label: String, detail: String },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Csv {
        path: PathBuf,
        /// 1-based line number in the file.
        line: usize,
        /// 0-based column index.
        column: usize,
        message: String,
    },

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
