//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A requested instrument level has no observations to support it.
    #[error("no support for instrument level {0}")]
    NoSupport(u8),

    /// A required stratum (rows with A = a) is empty.
    #[error("empty stratum: {0}")]
    EmptyStratum(String),

    /// All targeting weights are zero, so the fluctuation is undefined.
    #[error("empty targeting stratum")]
    EmptyTargetingStratum,

    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    BootstrapUnstable { failed: usize, total: usize },

    /// Row-indexed data validation failure (1-based data rows).
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
