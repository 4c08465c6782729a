use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The truncated distribution still carries significant weight at its edge.
    #[error(
        "truncation too small: first omitted term is {tail_ratio:e} of the peak at truncation {truncation} (threshold {threshold:e})"
    )]
    TruncationTooSmall {
        truncation: usize,
        tail_ratio: f64,
        threshold: f64,
    },

    #[error("incompatible truncation: expected {expected} photon-number entries, got {found}")]
    IncompatibleTruncation { expected: usize, found: usize },

    #[error("length mismatch: expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid count {count} at index {index}: must lie in [0, {shots}]")]
    InvalidCount { index: usize, count: u64, shots: u32 },

    #[error("invalid initial distribution: {0}")]
    InvalidInit(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    /// Malformed input file; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad user-supplied arguments rather than by
    /// numerical or data validation failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::InvalidSweep(_) | Error::InvalidInit(_)
        )
    }
}
