use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("t = {t} exceeds the enumeration limit of {max} items")]
    TooLarge { t: usize, max: usize },
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("mean resultant length r = {r} is saturated; the concentration estimate diverges")]
    Saturated { r: f64 },
    #[error("no convergence after {iters} iterations")]
    NonConvergence { iters: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
