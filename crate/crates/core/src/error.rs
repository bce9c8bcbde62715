//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular coefficient matrix: |ad - bc| = {det_abs:e} below tolerance {tol:e}")]
    SingularMatrix { det_abs: f64, tol: f64 },

    #[error("invalid cutoff profile: {0}")]
    InvalidProfile(String),

    #[error("panel budget exceeded: {panels} panels needed, limit is {limit}")]
    BudgetExceeded { panels: u64, limit: u64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("norm domain has zero area")]
    EmptyDomain,

    #[error("test function support [{0}, {1}) is not contained in [0, 1)")]
    UnsupportedSupport(f64, f64),

    #[error("caps {j} and {k} are too close; the bilinear weight needs |j - k| >= 2")]
    CapsTooClose { j: usize, k: usize },

    #[error("non-positive value {value:e} at lambda = {lambda} in log-log fit")]
    NonPositiveValue { lambda: f64, value: f64 },

    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
