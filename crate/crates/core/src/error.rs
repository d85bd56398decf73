//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument to an operation (out-of-range index, empty batch, shape
    /// mismatch).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration that can never run (mu > L, M < 2 for a cross-worker
    /// controller, budget too small).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Non-finite values showed up mid-run; the run is aborted.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Too few usable data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A feature required by the call was disabled in the run configuration.
    #[error("feature disabled: {0}")]
    FeatureDisabled(String),

    /// Two sets of run outputs cannot be compared (unequal budgets, missing
    /// groups).
    #[error("comparison error: {0}")]
    Comparison(String),

    /// A metrics or summary file does not match the documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Broken engine invariant (mismatched reduction shapes).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
