use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
///
/// Variants split into configuration/argument problems (bad inputs, parse
/// failures, unsupported systems) and numerical failures (non-convergence,
/// pole proximity). Callers that need to map errors onto process exit codes
/// can use [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported ifs: {0}")]
    UnsupportedIfs(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix order {order} exceeds the dense-solve cap {cap}; use partial_spectrum")]
    DenseCapExceeded { order: usize, cap: usize },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("lambda = {lambda} lies inside the pole guard of eigenvalue {eigenvalue}")]
    PoleProximity { lambda: f64, eigenvalue: f64 },

    #[error("point {0:?} lies outside every copy of the prefractal")]
    OutsideDomain(Vec<f64>),

    #[error("copy {branch} is not resolvable on the target grid")]
    Resolution { branch: usize },

    #[error("ill-conditioned spectrum: magnitude {magnitude} <= 1 inside the truncation window")]
    IllConditioned { magnitude: f64 },

    #[error("matrix convention violated: positive eigenvalue {0}")]
    PositiveEigenvalue(f64),
}

impl Error {
    /// True for failures of the numerics (convergence, poles, sign
    /// violations) as opposed to bad configuration or inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::PoleProximity { .. } | Error::PositiveEigenvalue(_)
        )
    }
}
