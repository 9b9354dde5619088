use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PilotError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PilotError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing value at row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },

    #[error("target column '{0}' not found in header")]
    TargetNotFound(String),

    #[error("target column '{column}' is not numeric (row {row}: '{token}')")]
    TargetNotNumeric {
        column: String,
        row: usize,
        token: String,
    },

    #[error("column '{column}' expects numbers, found '{token}' at row {row}")]
    NotNumeric {
        column: String,
        row: usize,
        token: String,
    },

    #[error("dataset has no data rows")]
    EmptyData,

    #[error("column mismatch: missing [{}], unexpected [{}]", missing.join(", "), extra.join(", "))]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("column '{column}': {reason}")]
    ColumnKind { column: String, reason: String },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file: unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}

impl PilotError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PilotError::Io {
            path: path.into(),
            source,
        }
    }
}
