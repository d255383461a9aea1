use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("operator must be positive definite for {context}")]
    NotPositiveDefinite { context: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} lies outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("incremental functional is not strictly convex (margin {margin:e})")]
    NonConvexStep { margin: f64 },

    #[error("step solver stalled at step {step} with residual {residual:e}")]
    SolverStall { step: usize, residual: f64 },

    #[error("iterate left the validity box of the energy at step {step} (|u|_inf = {norm})")]
    LeftValidityBox { step: usize, norm: f64 },

    #[error("inner solver did not converge (residual {residual:e})")]
    InnerSolver { residual: f64 },

    #[error("transcription grid with h = {h} does not divide N = {n}")]
    GridMismatch { h: f64, n: usize },

    #[error("sweep does not converge: finest pair differs by {fine:e}, coarser pair by {coarse:e}")]
    NonConvergentSweep { fine: f64, coarse: f64 },

    #[error("no jump cost supplied for the jump at t = {t}")]
    MissingCost { t: f64 },

    #[error("{0}")]
    Other(String),
}
