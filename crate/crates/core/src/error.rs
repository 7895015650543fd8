use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("order k must be at least {min}, got {got}")]
    InvalidOrder { got: usize, min: usize },

    #[error("point {value} at position {index} does not lie in the open interval (0, 1)")]
    PointOutOfRange { index: usize, value: f64 },

    #[error("value {value} occurs {count} times, more than the order k = {k}")]
    Multiplicity { value: f64, count: usize, k: usize },

    #[error("grid index n = {n} out of range, expected {min} <= n <= {max}")]
    GridIndex { n: usize, min: usize, max: usize },

    #[error("ell = {ell} must satisfy 1 <= ell <= k = {k}")]
    EllOutOfRange { ell: usize, k: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("infeasible configuration: {reason} (largest feasible ell is {max_ell})")]
    Infeasible { reason: String, max_ell: usize },

    #[error("placement [{lo}, {hi}] leaves the unit interval")]
    Placement { lo: f64, hi: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
