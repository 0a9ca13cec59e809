use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Linear dependence detected while orthonormalizing; `index` is the
    /// first input vector (or column) that falls inside the span of its
    /// predecessors.
    #[error("rank deficiency at index {index} (residual norm {residual:e})")]
    RankDeficient { index: usize, residual: f64 },

    #[error("invalid map spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("overflow: 2^{n} * |x| = {scaled:e} exceeds the safe range; use a smaller n_max")]
    Overflow { n: u32, scaled: f64 },

    #[error("extraction inconsistency: {0}")]
    ExtractionInconsistent(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no certified candidate found in any restart")]
    NoCertifiedCandidate,

    #[error("parse error: {0}")]
    Parse(String),
}
