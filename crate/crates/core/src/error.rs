use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the {side} m domain")]
    OutOfDomain { x: f64, y: f64, side: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("probe times must be non-decreasing (probe {index} at t={time} s)")]
    UnorderedProbes { index: usize, time: f64 },

    #[error("time moved backward: requested t={requested} s after t={current} s")]
    TimeReversal { requested: f64, current: f64 },

    #[error("distance to candidate column {column} is not finite")]
    NonFiniteDistance { column: usize },

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("simulation for candidate source ({x}, {y}) failed: {source}")]
    Evaluation {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
