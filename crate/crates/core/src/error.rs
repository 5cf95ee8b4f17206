use thiserror::Error;

/// Errors raised by the numeric engines and the experiment harness.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("degenerate region")]
    DegenerateRegion,
    #[error("grid mismatch")]
    GridMismatch,
    #[error("weight must be positive")]
    NonPositiveWeight,
    #[error("requires bounded exponent")]
    UnboundedExponent,
    #[error("truncation below grid resolution (eps = {eps}, h = {h})")]
    TruncationBelowResolution { eps: f64, h: f64 },
    #[error("series truncation unreliable (J = {0} < 4)")]
    SeriesTruncation(usize),
    #[error("empty family")]
    EmptyFamily,
    #[error("node is not inside the ball")]
    NodeOutsideBall,
    #[error("family not BMO-increasing")]
    NotBmoIncreasing,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidParameter(msg.into())
}
