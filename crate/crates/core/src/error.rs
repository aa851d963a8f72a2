use thiserror::Error;

/// Errors produced by the evaluators and constructions in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A derivative was requested at a point where it blows up.
    #[error("singularity: {0}")]
    Singularity(String),
    /// An iterative method did not reach its target.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// The point is too close to a boundary for the requested derivative.
    #[error("boundary error: {0}")]
    Boundary(String),
    /// Malformed input data (CSV, flags).
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(format!($($arg)*))
    };
}
pub(crate) use domain_err;
