use std::io;

/// Errors produced by the pathway mining library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid or incomplete configuration (missing column, bad filter setup, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Too few items for the requested operation.
    #[error("size error: {0}")]
    Size(String),

    /// Malformed input data (non-finite distances, corrupt files, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
