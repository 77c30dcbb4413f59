use thiserror::Error;

use crate::solver::SparseRegressor;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate gamma shape (theta1 = {theta1}, theta2 = {theta2}): every sample underflows to zero")]
    DegenerateShape { theta1: f64, theta2: f64 },

    #[error("infeasible energy bounds: acceptance probability {probability:e} is below 1e-6")]
    InfeasibleBounds { probability: f64 },

    #[error("solver did not converge after {sweeps} sweeps (kkt violation {violation:e})")]
    NonConvergence {
        sweeps: usize,
        violation: f64,
        best: Box<SparseRegressor>,
    },

    #[error(
        "residual criterion unmet along the whole path: last r = {last_r:e}, residual {last_residual:e} > target {target:e}"
    )]
    PathExhausted {
        last_r: f64,
        last_residual: f64,
        target: f64,
    },

    #[error("rate is undefined: {0}")]
    UndefinedRate(&'static str),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
