use thiserror::Error;

/// Failures raised by the DAM library.
///
/// Every variant names the condition that failed so that callers (and the
/// CLI) can report which invariant or precondition was violated.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is rank deficient: detected rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("no orthogonal complement: {cols} columns in a {rows}-dimensional space")]
    NoComplement { rows: usize, cols: usize },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot place {paths} distinct delays in {bins} delay bins")]
    DelayPlacement { paths: usize, bins: usize },

    #[error("zero vector where a nonzero channel vector is required")]
    ZeroVector,

    #[error("zero-forcing infeasible: {antennas} antennas for {paths} paths; use generic DAM with a larger residual span")]
    ZfInfeasible { antennas: usize, paths: usize },

    #[error("delay plan infeasible for n'_span = {requested}; minimal feasible n'_span is {minimal:?}")]
    PlanInfeasible {
        requested: usize,
        minimal: Option<usize>,
    },

    #[error("paths {paths:?} fall inside no delay window and would be zero-forced by every filter")]
    UncoveredPaths { paths: Vec<usize> },

    #[error("every path component is zero-forced; the resulting delay spread is undefined")]
    EmptyComponentSet,

    #[error("effective channel vanished on every subcarrier")]
    DegenerateChannel,

    #[error("stream too short: {len} samples, need at least {needed}")]
    StreamTooShort { len: usize, needed: usize },

    #[error("unsupported QAM order {0}")]
    UnsupportedOrder(usize),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
