use thiserror::Error;

/// Errors raised by the geometry kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("distribution is not bracket generating: {0}")]
    NotBracketGenerating(String),

    #[error("operation requires a Riemannian (corank 0) metric")]
    UnsupportedSubRiemannian,

    #[error("solver failed to converge (best residual {best_residual:e})")]
    SolverFailure { best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
