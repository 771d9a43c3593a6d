//! Error type shared by every solver in the crate.

use thiserror::Error;

/// Failure modes of the solvers and samplers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An iterative solver ran out of iterations or lost monotonicity.
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),

    /// A model assumption was violated by the data (e.g. a covariance
    /// matrix indefinite beyond tolerance, or a front hitting the domain edge).
    #[error("model violation: {0}")]
    Model(String),

    /// Wrapped I/O failure from serialization helpers.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
