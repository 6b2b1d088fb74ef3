use thiserror::Error;

/// Crate-wide error type. Variants are grouped by whether they indicate a
/// misconfigured call (rejected before any numerics run) or a numeric
/// failure discovered mid-computation; `is_config` reports the split so the
/// CLI can map errors to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("zero direction: {0}")]
    ZeroDirection(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular triangular factor: {0}")]
    SingularR(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("sample too small: {0}")]
    SampleTooSmall(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad configuration or malformed input, as
    /// opposed to numeric failures in an otherwise well-posed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::IndexOutOfRange(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
