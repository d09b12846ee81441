use thiserror::Error;

/// Error taxonomy shared by every module in the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A computation exceeded its configured resource budget.
    #[error("resource limit: {0}")]
    Resource(String),
    /// Not enough data to produce a meaningful result.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A numerical routine failed to converge or produced garbage.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A filesystem operation failed while exporting results.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
