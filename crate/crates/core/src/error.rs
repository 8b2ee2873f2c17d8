use thiserror::Error;

/// Failure modes shared across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point is not on the boundary (residual {0:e})")]
    NotOnBoundary(f64),
    #[error("normal vector is ambiguous at this point")]
    AmbiguousNormal,
    #[error("center is not strictly interior to the set")]
    NotInterior,
    #[error("non-finite input")]
    NonFinite,
    #[error("origin not interior to supporting cone (zeta^T y_bar = {0:e})")]
    NonPositiveSupport(f64),
    #[error("negative discriminant {0:e}")]
    NegativeDiscriminant(f64),
    #[error("operation requires a positive gauge value")]
    ZeroGauge,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linearized level set is empty")]
    EmptyLevelSet,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("objective value must be positive")]
    NonPositiveObjective,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
