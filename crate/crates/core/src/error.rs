use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NumericParse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("distance model error: {0}")]
    Model(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("no usable seeding attribute")]
    NoUsableAttribute,

    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 for I/O, 3 for schema and input-format problems, 4 for bad
    /// parameters, 5 for failures inside the clustering pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Schema(_)
            | Error::MalformedRow { .. }
            | Error::NumericParse { .. }
            | Error::Csv { .. } => 3,
            Error::Parameter(_) | Error::LengthMismatch { .. } => 4,
            Error::Model(_) | Error::NoUsableAttribute | Error::Json(_) => 5,
        }
    }
}
