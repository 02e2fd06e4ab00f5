use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid isotopy: {0}")]
    InvalidIsotopy(String),
    #[error("size limit exceeded: n = {n} (max {max})")]
    SizeLimit { n: usize, max: usize },
    #[error("no such square: {0}")]
    NoSuchSquare(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("table is not a group: {0}")]
    NotAGroup(String),
    #[error("gauge matrix is not orthogonal (deviation {0:e})")]
    Gauge(f64),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("landscape probe failed: none of {k} restarts converged")]
    ProbeFailed { k: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
