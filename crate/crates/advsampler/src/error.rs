//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector had an unexpected shape at an API boundary.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration (bad layer list, malformed config file, unknown id, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A non-finite value showed up where finite arithmetic was required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An estimator was handed fewer samples than it needs.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A value fell outside the support it is restricted to.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Every sample in a generated batch landed where the target vanishes.
    #[error("degenerate batch at iteration {iteration}: {detail}")]
    DegenerateBatch { iteration: u64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
