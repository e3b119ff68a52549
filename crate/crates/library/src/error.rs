use tse_core::CoreError;

use crate::ingest::IngestError;
use crate::metadata::ValidationError;

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("not found")]
    NotFound,
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("series has not opted in to alerts")]
    NotOptedIn,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("alert sink unavailable: {0}")]
    SinkUnavailable(String),
    #[error("data directory is in use by another process")]
    Locked,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LibraryError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            LibraryError::NotFound => "not_found",
            LibraryError::Validation(_) => "validation_error",
            LibraryError::Ingest(e) => e.code(),
            LibraryError::NotOptedIn => "not_opted_in",
            LibraryError::InvalidParameter(_) => "invalid_parameter",
            LibraryError::SinkUnavailable(_) => "sink_unavailable",
            LibraryError::Locked => "locked",
            LibraryError::Core(CoreError::NotFound) => "not_found",
            LibraryError::Core(CoreError::LibraryTooSmall { .. } | CoreError::EmptyLibrary) => "library_too_small",
            LibraryError::Core(CoreError::TooFewPoints { .. }) => "library_too_small",
            LibraryError::Core(_) => "computation_error",
            LibraryError::Io(_) => "io_error",
        }
    }
}

pub type Result<T, E = LibraryError> = std::result::Result<T, E>;
