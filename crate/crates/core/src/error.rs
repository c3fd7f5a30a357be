//! Error type shared across the library.

use thiserror::Error;

/// Failure classes surfaced by the library.
///
/// Variants group errors the way callers branch on them; messages carry the
/// offending dimensions or values.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data or configuration violates a documented precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// The SVD iteration failed to converge within the iteration budget.
    #[error("svd did not converge within {max_iterations} iterations")]
    SvdFailed { max_iterations: usize },

    /// Grid construction failed: degenerate bounds, a flat or boundary-pinned
    /// mode, or a tail bound that could not be reached.
    #[error("grid: {0}")]
    Grid(String),

    /// Functional list misuse: duplicate names, a missing required name, or a
    /// dimension mismatch.
    #[error("functional: {0}")]
    Functional(String),

    /// Sampler misconfiguration or a non-finite log density at the chain
    /// start.
    #[error("sampler: {0}")]
    Sampler(String),

    /// A brute-force integration failed its own convergence guards.
    #[error("unconverged: {0}")]
    Unconverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
