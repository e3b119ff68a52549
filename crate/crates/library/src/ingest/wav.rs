use tse_core::RawSeries;

use super::{check_values, IngestError};

pub const MIN_SAMPLE_RATE: u32 = 4000;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// First channel of a decoded WAV file, scaled to [-1, 1] for integer PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channels: u16,
    pub bits: u16,
    pub float: bool,
}

fn malformed(msg: &str) -> IngestError {
    IngestError::MalformedContainer(msg.to_string())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    tag: u16,
    channels: u16,
    rate: u32,
    block_align: u16,
    bits: u16,
}

fn read_fmt(body: &[u8]) -> Result<Fmt, IngestError> {
    if body.len() < 16 {
        return Err(malformed("fmt chunk too short"));
    }
    let mut tag = u16_at(body, 0);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(malformed("extensible fmt chunk too short"));
        }
        // the sub-format GUID starts with the actual format tag
        tag = u16_at(body, 24);
    }
    Ok(Fmt {
        tag,
        channels: u16_at(body, 2),
        rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits: u16_at(body, 14),
    })
}

/// Decode the first channel of a RIFF/WAVE file. Integer samples are divided
/// by `2^(bits - 1)`; float samples are taken as stored.
pub fn decode_wav(bytes: &[u8]) -> Result<WavAudio, IngestError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut fmt = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let start = at + 8;
        // streaming writers leave the size of the last chunk unset
        let end = start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => fmt = Some(read_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        at = start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;

    let float = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16 | 24 | 32) => false,
        (FORMAT_FLOAT, 32 | 64) => true,
        (tag, bits) => return Err(IngestError::UnsupportedCodec { format_tag: tag, bits }),
    };
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }
    let width = usize::from(fmt.bits / 8);
    let block = usize::from(fmt.block_align);
    if block < width * usize::from(fmt.channels) {
        return Err(malformed("block alignment smaller than one frame"));
    }
    if fmt.rate < MIN_SAMPLE_RATE {
        return Err(IngestError::SampleRateTooLow { rate: fmt.rate, min: MIN_SAMPLE_RATE });
    }

    let scale = 2f64.powi(i32::from(fmt.bits) - 1);
    let samples = data
        .chunks_exact(block)
        .map(|frame| {
            let s = &frame[..width];
            match (float, width) {
                (false, 2) => f64::from(i16::from_le_bytes([s[0], s[1]])) / scale,
                (false, 3) => f64::from(i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) / scale,
                (false, 4) => f64::from(i32::from_le_bytes([s[0], s[1], s[2], s[3]])) / scale,
                (true, 4) => f64::from(f32::from_le_bytes([s[0], s[1], s[2], s[3]])),
                (true, 8) => f64::from_le_bytes(s.try_into().expect("eight bytes")),
                _ => unreachable!("codec checked above"),
            }
        })
        .collect();
    Ok(WavAudio { samples, sample_rate: fmt.rate, channels: fmt.channels, bits: fmt.bits, float })
}

/// Decode and validate: first channel only, no resampling, rate at least 4 kHz.
pub fn parse_wav(bytes: &[u8]) -> Result<(RawSeries, u32), IngestError> {
    let audio = decode_wav(bytes)?;
    Ok((check_values(audio.samples)?, audio.sample_rate))
}
