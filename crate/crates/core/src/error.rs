use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shape or size of an input is unusable (odd Pfaffian order, empty grid, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// An input violates a documented invariant (skew symmetry, ordering, K < M, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An iterative method ran out of iterations.
    #[error("no convergence in {what} after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// Adaptive quadrature could not meet its tolerance; carries the best estimate.
    #[error("quadrature tolerance not met: value {value:e}, error estimate {err_est:e}")]
    Tolerance { value: f64, err_est: f64 },

    /// Problem size outside what an operation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Non-finite or otherwise broken numerical result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
