use thiserror::Error;

/// Errors reported by the solvers and validators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular (smallest/largest singular value ratio {ratio:e})")]
    Singular { ratio: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("spectral density is not coercive (smallest eigenvalue {min_eig:e} on the grid)")]
    NonCoercive { min_eig: f64 },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("dual problem diverged: {0}")]
    DualDiverged(String),

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("covariance matrix is not in the range of the filter bank operator (residual {residual:e})")]
    NotInRange { residual: f64 },

    #[error("B* Sigma^-1 B is singular")]
    DegenerateLambda,

    #[error("Pick matrix is not positive definite (smallest eigenvalue {min_eig:e})")]
    PickNotPD { min_eig: f64 },

    #[error("operation requires a scalar (m = 1) spectrum, got block dimension {0}")]
    NotScalar(usize),

    #[error("moment target lies on the boundary of the feasible polytope (multiplier direction {direction:?})")]
    TargetOnBoundary { direction: Vec<f64> },

    #[error("band violation: largest off-band block magnitude {max_off_band:e}")]
    BandViolation { max_off_band: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("kernel factorization inconsistent (Chapman-Kolmogorov residual {residual:e})")]
    InconsistentKernels { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
