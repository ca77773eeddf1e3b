use thiserror::Error;

/// Errors produced by the efgp library.
#[derive(Debug, Error)]
pub enum EfgpError {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid argument (mismatched sizes, bad ranges).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A theorem hypothesis does not hold, so the rigorous bound is void.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Requested problem size exceeds a configured cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A dense factorization or eigendecomposition failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV/JSON input that could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, EfgpError>;
