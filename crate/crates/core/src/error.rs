use std::path::PathBuf;

use chrono::NaiveDateTime;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-positive value {value} at {timestamp} cannot be log-transformed")]
    NonPositive {
        timestamp: NaiveDateTime,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no parameter for bucket {0}")]
    MissingBucket(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("series share no common timestamps")]
    EmptyIntersection,

    #[error("likelihood maximum stuck at bracket boundary after widening; best a = {best_a}")]
    BracketExhausted { best_a: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl Error {
    /// Stable short name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Parse { .. } => "parse",
            Error::MissingColumn(_) => "missing-column",
            Error::DuplicateTimestamp(_) => "duplicate-timestamp",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::NonPositive { .. } => "non-positive",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MissingBucket(_) => "missing-bucket",
            Error::Degenerate(_) => "degenerate",
            Error::EmptyIntersection => "empty-intersection",
            Error::BracketExhausted { .. } => "bracket-exhausted",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
