use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate cluster: all values are zero")]
    DegenerateCluster,

    #[error("no entry exceeds 1 in absolute value")]
    NoExceedance,

    #[error("invalid lattice window: {0}")]
    InvalidWindow(String),

    #[error("duplicate index {0} in cluster entries")]
    DuplicateIndex(String),

    #[error("cluster text is not in canonical form: {0}")]
    NotCanonical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("truncation at radius {0} keeps no nonzero coefficient")]
    InvalidTruncation(usize),

    #[error("invalid level {0}: must be positive and finite")]
    InvalidLevel(f64),

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid blocking: {0}")]
    InvalidBlocking(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("score drift E[s(A,B)] = {0} is not negative")]
    DriftViolation(f64),

    #[error("no pair of letters has a positive score")]
    NoPositiveScore,

    #[error("could not bracket the Lundberg root below theta = {0}")]
    BracketFailure(f64),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("csv output failed: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
