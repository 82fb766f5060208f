use thiserror::Error;

/// Errors shared across the simulation, scaling, solver, and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An arrival occurred while every representable queue level was saturated.
    /// The state vector is too short for this run; re-run with a larger `k_max`.
    #[error("representation overflow at t = {time}: all {k_max} levels saturated (increase k_max)")]
    RepresentationOverflow { time: f64, k_max: usize },

    #[error("grid out of range: {0}")]
    GridOutOfRange(String),

    #[error("precondition violation: {0}")]
    PreconditionViolation(String),

    #[error(
        "fixed-point iteration did not converge in window {window_index}: \
         residual {residual:.3e} > tol {tol:.3e} after {iters} iterations"
    )]
    NonConvergence {
        window_index: usize,
        residual: f64,
        tol: f64,
        iters: usize,
    },

    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),

    #[error("empty sample")]
    EmptySample,

    #[error("config error: field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
