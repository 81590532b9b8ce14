use thiserror::Error;

/// Errors raised by the model, set, solver and estimator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("covariance matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iterative projection did not converge (residual {residual:e} after {iterations} sweeps)")]
    ConvergenceFailure { residual: f64, iterations: usize },

    #[error("polyhedron has empty interior (Chebyshev radius {radius:e})")]
    EmptyInterior { radius: f64 },

    #[error("dominating-point solver diverged (step norm {step_norm:e} after {iterations} iterations)")]
    SolverDivergence { step_norm: f64, iterations: usize },

    #[error("atypical set violated: the set contains the origin")]
    NotAtypical,

    #[error("constraint matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("consecutive constraint rows {index} and {} are singular (|det| = {det:e})", index + 1)]
    SingularPair { index: usize, det: f64 },

    #[error("mixture mean inside set: component {component} has its mean inside the set")]
    MeanInsideSet { component: usize },

    #[error("insufficient points: slope fit needs at least 3 distinct speeds, got {found}")]
    InsufficientPoints { found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
