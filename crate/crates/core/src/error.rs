use thiserror::Error;

use crate::geometry::WorldPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("point projects to infinity (depth {depth:e})")]
    AtInfinity { depth: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("consistent region is empty")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("refinement diverged after {iterations} iterations")]
    Diverged { best: WorldPoint, iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that signal an empty consistent region rather than a bug.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible)
    }
}
