use num_complex::Complex64;
use thiserror::Error;

/// Errors surfaced by model construction, the fixed-point solver, the
/// simulator, and the comparison pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error(
        "covariance component {index} is not positive semidefinite: \
         eigenvalue {min_eig:.6e} is below the tolerance {threshold:.6e}"
    )]
    NotPsd {
        index: usize,
        min_eig: f64,
        threshold: f64,
    },

    #[error(
        "covariance component {index} is asymmetric: relative gap {relative:.6e} exceeds 1e-10"
    )]
    AsymmetryTooLarge { index: usize, relative: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("resolvent matrix is numerically singular at z = {z}")]
    SingularResolvent { z: Complex64 },

    #[error("block linear system is numerically singular")]
    SingularSystem,

    #[error(
        "fixed-point iteration did not converge at z = {z} after {iters} iterations \
         (last residual {residual:.6e})"
    )]
    NoConvergence {
        z: Complex64,
        iters: usize,
        residual: f64,
        /// Residual after each iteration, for diagnosing stalls and cycles.
        trajectory: Vec<f64>,
    },

    #[error(
        "iterate left the closed upper half-plane at z = {z}: Im {quantity} = {imag:.6e}"
    )]
    DomainViolation {
        z: Complex64,
        quantity: String,
        imag: f64,
    },

    #[error("zero denominator in {context}: inputs lie outside the valid domain")]
    ZeroDenominator { context: String },

    #[error("symmetric eigendecomposition failed to converge")]
    EigenFailure,

    #[error(
        "empirical spectrum range [{emp_min:.6e}, {emp_max:.6e}] does not overlap \
         the density grid range [{grid_min:.6e}, {grid_max:.6e}]"
    )]
    RangeMismatch {
        emp_min: f64,
        emp_max: f64,
        grid_min: f64,
        grid_max: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            got,
        }
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateDesign(msg.into())
    }

    pub(crate) fn zero_denominator(context: impl Into<String>) -> Self {
        Error::ZeroDenominator {
            context: context.into(),
        }
    }
}
