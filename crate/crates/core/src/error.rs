//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset construction, valuation, and pipeline runs.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying file I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A cell of an input file failed to parse. Row numbers are 1-based file
    /// lines (the header line counts), columns are named when a header exists.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    /// A precondition on the arguments was violated.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A computation produced a non-finite number.
    #[error("numeric failure: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
