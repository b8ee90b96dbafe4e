//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by prior construction, numerical routines, estimation,
/// and file ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (non-finite value,
    /// out-of-range parameter, mismatched lengths, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested operation is not defined for this prior family
    /// (for example, a shrinkage rate for a discrete prior, or sampling
    /// from an improper prior).
    #[error("{operation} is not defined for the {family} prior family")]
    Unsupported {
        /// Name of the operation that was requested.
        operation: &'static str,
        /// Prior family the operation was requested for.
        family: &'static str,
    },

    /// The input lies outside the domain where the operation is defined
    /// (for example, a shrinkage rate where the prior density is zero).
    #[error("domain error: {0}")]
    Domain(String),

    /// A tail integral diverges for the requested parameter combination.
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// An iterative numerical routine failed to converge, or produced a
    /// non-finite intermediate value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A maximum-likelihood fit could not be completed (empty tail sample,
    /// no root in the search bracket, ...).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Input data was structurally invalid (bad header, no usable rows).
    #[error("invalid input data: {0}")]
    InvalidData(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV parse failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Build an [`Error::InvalidArgument`] from anything displayable.
    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }
}
