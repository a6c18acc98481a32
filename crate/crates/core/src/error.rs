use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// [`Error::category`] gives a short stable tag used by the command line
/// front end for machine-parsable failure lines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Record { .. } => "record",
            Error::Schema(_) => "schema",
            Error::Cell { .. } => "cell",
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Diverged(_) => "diverged",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
