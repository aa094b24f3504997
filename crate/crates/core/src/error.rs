use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("particles {i} and {j} coincide")]
    Singularity { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step cap {cap} exceeded (position {position}, {steps} steps taken)")]
    Timeout { cap: u64, steps: u64, position: i64 },

    #[error("bound at level {level} returned {value}, outside [0, 1]")]
    BoundRange { level: usize, value: f64 },

    #[error("bound at level {level} returned {value}, above the previous level {previous}")]
    Dominance { level: usize, value: f64, previous: f64 },

    #[error("acceptance ratio {ratio} exceeds 1: rate bound violated")]
    BoundViolation { ratio: f64 },

    #[error("jump segment exceeded {events} events")]
    Runaway { events: u64 },

    #[error("state space of {states} states exceeds the limit of {limit}")]
    Size { states: usize, limit: usize },

    #[error("input too small: {0}")]
    TooSmall(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Numerical { iterations: usize, residual: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
