//! Error taxonomy shared by every module in this crate.
//!
//! Fallible operations return [`crate::Result`].  The variants map onto the
//! process exit codes used by the command-line driver: configuration and
//! input problems exit with 2, numerical failures with 3, and hypothesis
//! violations (flat densities, non-invertible Hessians) with 4.

use thiserror::Error;

/// Unified error type for geometry, quadrature, optimization, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (dimension mismatch,
    /// coordinate out of range, empty sample set, invalid schedule, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The logarithm map was requested at (or numerically on top of) the cut
    /// locus of the base point, where it is not defined.
    #[error("log map undefined: target within {dist:.3e} of the cut locus")]
    CutLocus {
        /// Distance from the target to the cut locus of the base point.
        dist: f64,
    },

    /// A computation produced a non-finite value or failed to reach its
    /// numerical target (quadrature blow-up, NaN propagation, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A well-posed computation was requested for data that violate the
    /// standing hypotheses (e.g. a covariance for a flat objective with no
    /// isolated minimizer, or a non positive definite Hessian).
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// The run configuration failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    /// An underlying filesystem operation failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::CutLocus { .. } | Error::Numerical(_) => 3,
            Error::HypothesisViolation(_) => 4,
        }
    }
}
