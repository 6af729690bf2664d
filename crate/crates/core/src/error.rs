use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, hyperparameter or precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two arrays, vectors or matrices have incompatible sizes.
    #[error("shape error: {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A qubit or sample index is out of range or otherwise invalid.
    #[error("index error: {0}")]
    Index(String),

    /// A numerical precondition failed (non-PSD kernel, non-convergence, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed dataset file.
    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    /// Training produced a non-finite loss or otherwise diverged.
    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A metric is undefined for the given inputs.
    #[error("metric error: {0}")]
    Metric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
