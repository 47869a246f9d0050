use thiserror::Error;

use crate::dump::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// Every key position of a query row was masked out.
    #[error("attention row {row} is fully masked")]
    DegenerateRow { row: usize },

    #[error("out of range: {0}")]
    Range(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("data unavailable: {0}")]
    Unavailable(String),

    #[error("dump rejected: {} validation error(s)", .0.errors.len())]
    Validation(Box<ValidationReport>),

    #[error("metadata conflict: {0}")]
    Conflict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
