use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The bordered interpolation system for one angular slice is numerically
    /// singular.
    #[error("slice {slice}: interpolation system ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { slice: usize, cond: f64 },

    /// A slice has too few samples for the requested operation.
    #[error("slice {slice}: {len} samples are too few (need at least {min})")]
    DegenerateSlice {
        slice: usize,
        len: usize,
        min: usize,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
