//! Upload parsing: plain-text and CSV columns, WAV audio, zip bundles.

pub mod bulk;
mod numeric;
mod wav;

use std::path::Path;

use serde::{Deserialize, Serialize};
use tse_core::signal::MIN_SERIES_LEN;
use tse_core::RawSeries;

pub use numeric::{parse_numeric_file, write_csv, write_txt};
pub use wav::{decode_wav, parse_wav, WavAudio, MIN_SAMPLE_RATE};

/// Uploads are cut to this many samples.
pub const MAX_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    /// `position` is the 1-based line for text files and the 1-based frame for audio.
    #[error("non-finite value at position {position}")]
    NonFiniteValue { position: usize },
    #[error("series has {len} samples, at least {min} are required")]
    TooShort { len: usize, min: usize },
    #[error("more than one column could hold the series")]
    MultiColumnAmbiguity,
    #[error("constant series has no defined features")]
    ConstantSeries,
    #[error("unsupported audio encoding (format tag {format_tag:#06x}, {bits} bits)")]
    UnsupportedCodec { format_tag: u16, bits: u16 },
    #[error("sampling rate {rate} Hz is below the {min} Hz minimum")]
    SampleRateTooLow { rate: u32, min: u32 },
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::ParseError { .. } => "parse_error",
            IngestError::NonFiniteValue { .. } => "non_finite_value",
            IngestError::TooShort { .. } => "too_short",
            IngestError::MultiColumnAmbiguity => "multi_column_ambiguity",
            IngestError::ConstantSeries => "constant_series",
            IngestError::UnsupportedCodec { .. } => "unsupported_codec",
            IngestError::SampleRateTooLow { .. } => "sample_rate_too_low",
            IngestError::MalformedContainer(_) => "malformed_container",
            IngestError::MalformedArchive(_) => "malformed_archive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Txt,
    Csv,
    Wav,
}

fn is_riff_wave(bytes: &[u8]) -> bool {
    bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE"
}

/// Decide the format from the content first and the extension second.
pub fn detect_format(bytes: &[u8], filename: &str) -> Result<FileFormat, IngestError> {
    if is_riff_wave(bytes) {
        return Ok(FileFormat::Wav);
    }
    let ext = Path::new(filename).extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("wav") | Some("wave") => Err(IngestError::MalformedContainer("missing RIFF/WAVE header".into())),
        Some("csv") => Ok(FileFormat::Csv),
        Some("txt") => Ok(FileFormat::Txt),
        _ => {
            let first = bytes.split(|&b| b == b'\n').find(|l| !l.iter().all(u8::is_ascii_whitespace));
            Ok(if first.is_some_and(|l| l.contains(&b',')) { FileFormat::Csv } else { FileFormat::Txt })
        }
    }
}

/// First `MAX_SAMPLES` samples, and whether anything was cut.
pub fn truncate(series: RawSeries) -> (RawSeries, bool) {
    if series.len() <= MAX_SAMPLES {
        return (series, false);
    }
    let mut v = series.into_inner();
    v.truncate(MAX_SAMPLES);
    (RawSeries::new(v).expect("prefix of a valid series is valid"), true)
}

/// A parsed and truncated upload, before it is staged or stored.
#[derive(Debug, Clone, PartialEq)]
pub struct UploadEnvelope {
    pub filename: String,
    pub format: FileFormat,
    pub series: RawSeries,
    pub truncated: bool,
    /// Header rate of audio uploads.
    pub source_sampling_rate: Option<f64>,
}

/// Detect, parse and truncate one uploaded file.
pub fn read_upload(bytes: &[u8], filename: &str) -> Result<UploadEnvelope, IngestError> {
    let format = detect_format(bytes, filename)?;
    let (series, rate) = match format {
        FileFormat::Wav => {
            let (s, r) = parse_wav(bytes)?;
            (s, Some(f64::from(r)))
        }
        text => (parse_numeric_file(bytes, text)?, None),
    };
    let (series, truncated) = truncate(series);
    Ok(UploadEnvelope { filename: filename.to_string(), format, series, truncated, source_sampling_rate: rate })
}

pub(crate) fn check_values(values: Vec<f64>) -> Result<RawSeries, IngestError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(IngestError::NonFiniteValue { position: i + 1 });
    }
    if values.len() < MIN_SERIES_LEN {
        return Err(IngestError::TooShort { len: values.len(), min: MIN_SERIES_LEN });
    }
    Ok(RawSeries::new(values).expect("checked above"))
}
