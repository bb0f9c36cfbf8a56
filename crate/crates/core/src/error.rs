use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("model is not stationary (spectral radius of A/w = {radius:.6})")]
    NonStationary { radius: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from the inputs rather than from a numerical
    /// failure. A non-stationary model counts as bad input.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
