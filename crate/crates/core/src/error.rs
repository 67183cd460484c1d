use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by loading, oversampling, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Both heterogeneous clusters of a target are empty.
    #[error("no heterogeneous cluster available for target (class {class}, group {group})")]
    HeteroUnavailable { class: u8, group: usize },

    #[error("cluster (class {class}, group {group}) has no instances to sample from")]
    NoSource { class: u8, group: usize },

    /// Two interpolation endpoints coincide.
    #[error("degenerate pair: distance between endpoints is zero")]
    DegeneratePair,

    /// A conditional rate has an empty conditioning set.
    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than the runtime environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Parameter(_)
                | Error::InsufficientData(_)
                | Error::Serialization(_)
        )
    }
}
