use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("budget exhausted: {limit} discipline evaluations already spent")]
    BudgetExhausted { limit: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {len} blocks")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid bounds for dimension {dim}: lower {lower} must be below upper {upper}")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("kernel matrix not positive definite even with nugget {nugget:e}")]
    NotPositiveDefinite { nugget: f64 },

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed trace file: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
