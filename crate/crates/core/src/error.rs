use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("series is constant (zero variance)")]
    DegenerateSeries,
    #[error("series too short: {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },
    #[error("series contains a non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("library too small: {size} series, need at least {min}")]
    LibraryTooSmall { size: usize, min: usize },
    #[error("not found")]
    NotFound,
    #[error("library is empty")]
    EmptyLibrary,
    #[error("normalization epoch mismatch: {left} vs {right}")]
    EpochMismatch { left: u64, right: u64 },
    #[error("vectors share no defined features")]
    NoCommonFeatures,
    #[error("every feature column contains undefined entries")]
    AllColumnsBad,
    #[error("too few points: {n}, need at least {min}")]
    TooFewPoints { n: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
