use thiserror::Error;

/// Errors produced by the discretization and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("value {value} is not an admissible label")]
    NotALabel { value: f64 },

    #[error("raster is not nested into the target mesh: {0}")]
    NotNested(String),

    #[error("test field is infeasible: {0}")]
    InfeasibleWitness(String),

    #[error(
        "solver did not converge after {iterations} iterations (bounds [{lower}, {upper}])"
    )]
    NonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
