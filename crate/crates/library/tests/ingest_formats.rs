mod common;

use std::io::Cursor;

use proptest::prelude::*;
use tse_library::ingest::{
    decode_wav, parse_numeric_file, parse_wav, read_upload, write_csv, write_txt, FileFormat, IngestError,
};

fn wav_bytes<S: hound::Sample + Copy>(spec: hound::WavSpec, frames: &[Vec<S>]) -> Vec<u8> {
    let mut cur = Cursor::new(Vec::new());
    let mut w = hound::WavWriter::new(&mut cur, spec).unwrap();
    for f in frames {
        for &s in f {
            w.write_sample(s).unwrap();
        }
    }
    w.finalize().unwrap();
    cur.into_inner()
}

fn int_spec(channels: u16, bits: u16, rate: u32) -> hound::WavSpec {
    hound::WavSpec { channels, sample_rate: rate, bits_per_sample: bits, sample_format: hound::SampleFormat::Int }
}

fn mono<S: Copy>(v: &[S]) -> Vec<Vec<S>> {
    v.iter().map(|&s| vec![s]).collect()
}

#[test]
fn pcm16_rescale_is_exact() {
    let bytes = wav_bytes(int_spec(1, 16, 8000), &mono(&[0i16, 16384, -16384]));
    let a = decode_wav(&bytes).unwrap();
    assert_eq!(a.samples, vec![0.0, 0.5, -0.5]);
    assert_eq!(a.sample_rate, 8000);
}

#[test]
fn stereo_keeps_left_channel() {
    let frames: Vec<Vec<i16>> = (0..100).map(|i| vec![i as i16 * 100, -1]).collect();
    let (s, rate) = parse_wav(&wav_bytes(int_spec(2, 16, 22050), &frames)).unwrap();
    assert_eq!(rate, 22050);
    assert_eq!(s.len(), 100);
    assert!(s.values().iter().enumerate().all(|(i, &v)| v == (i as f64 * 100.0) / 32768.0));
}

#[test]
fn wider_integer_encodings() {
    let v24: Vec<i32> = (0..64).map(|i| (i - 32) * 200_000).collect();
    let a = decode_wav(&wav_bytes(int_spec(1, 24, 48_000), &mono(&v24))).unwrap();
    assert!(a.samples.iter().zip(&v24).all(|(s, &x)| *s == x as f64 / 8_388_608.0));
    let v32: Vec<i32> = (0..64).map(|i| (i - 32) * 60_000_000).collect();
    let a = decode_wav(&wav_bytes(int_spec(3, 32, 48_000), &v32.iter().map(|&x| vec![x, 0, 0]).collect::<Vec<_>>()))
        .unwrap();
    assert_eq!(a.channels, 3);
    assert!(a.samples.iter().zip(&v32).all(|(s, &x)| *s == x as f64 / 2_147_483_648.0));
}

#[test]
fn float32_sine_matches_written_oracle() {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 44_100,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let oracle: Vec<f32> =
        (0..4410).map(|i| (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 44_100.0).sin()).collect();
    let (s, rate) = parse_wav(&wav_bytes(spec, &mono(&oracle))).unwrap();
    assert_eq!(rate, 44_100);
    assert!(s.values().iter().zip(&oracle).all(|(a, &b)| (a - b as f64).abs() < 1e-6));
}

/// Minimal float64 file written by hand; hound has no 64-bit writer.
fn wav_f64(rate: u32, samples: &[f64]) -> Vec<u8> {
    let data: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&3u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&rate.to_le_bytes());
    b.extend_from_slice(&(rate * 8).to_le_bytes());
    b.extend_from_slice(&8u16.to_le_bytes());
    b.extend_from_slice(&64u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&(data.len() as u32).to_le_bytes());
    b.extend_from_slice(&data);
    b
}

#[test]
fn float64_is_bit_exact() {
    let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.123).sin() / 3.0).collect();
    let (s, _) = parse_wav(&wav_f64(16_000, &v)).unwrap();
    assert!(s.values().iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn sample_rate_floor() {
    let v: Vec<i16> = (0..64).map(|i| i * 10).collect();
    assert_eq!(
        parse_wav(&wav_bytes(int_spec(1, 16, 3999), &mono(&v))).unwrap_err(),
        IngestError::SampleRateTooLow { rate: 3999, min: 4000 }
    );
    assert_eq!(parse_wav(&wav_bytes(int_spec(1, 16, 4000), &mono(&v))).unwrap().1, 4000);
}

#[test]
fn codec_and_container_errors() {
    let v: Vec<i8> = (0..64).map(|i| i as i8).collect();
    assert_eq!(
        parse_wav(&wav_bytes(int_spec(1, 8, 8000), &mono(&v))).unwrap_err(),
        IngestError::UnsupportedCodec { format_tag: 1, bits: 8 }
    );
    let mut mp3ish = wav_f64(8000, &[0.0; 64]);
    mp3ish[20] = 0x55;
    assert!(matches!(parse_wav(&mp3ish), Err(IngestError::UnsupportedCodec { format_tag: 0x55, .. })));
    assert!(matches!(parse_wav(b"RIFF\x04\0\0\0WAVE"), Err(IngestError::MalformedContainer(_))));
    assert!(matches!(parse_wav(b"hello"), Err(IngestError::MalformedContainer(_))));
    let nan = wav_f64(8000, &[f64::NAN; 64]);
    assert_eq!(parse_wav(&nan).unwrap_err(), IngestError::NonFiniteValue { position: 1 });
    let short = wav_f64(8000, &[0.5; 31]);
    assert_eq!(parse_wav(&short).unwrap_err(), IngestError::TooShort { len: 31, min: 32 });
}

#[test]
fn uploads_are_truncated_to_ten_thousand() {
    let v: Vec<f64> = (0..10_001).map(|i| (i as f64 * 0.01).sin()).collect();
    let env = read_upload(&common::txt(&v), "long.txt").unwrap();
    assert!(env.truncated);
    assert_eq!(env.series.values(), &v[..10_000]);
    let env = read_upload(&common::txt(&v[..10_000]), "exact.txt").unwrap();
    assert!(!env.truncated);
    assert_eq!(env.series.len(), 10_000);

    let frames: Vec<Vec<i16>> = (0..15_000).map(|i| vec![(i % 1000) as i16, 7]).collect();
    let env = read_upload(&wav_bytes(int_spec(2, 16, 8000), &frames), "audio.wav").unwrap();
    assert_eq!((env.format, env.truncated, env.series.len()), (FileFormat::Wav, true, 10_000));
    assert_eq!(env.source_sampling_rate, Some(8000.0));
    assert_eq!(env.series.values()[999], 999.0 / 32768.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip_is_bit_identical(values in prop::collection::vec(
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 32..300))
    {
        for (body, fmt) in [(write_txt(&values), FileFormat::Txt), (write_csv(&values), FileFormat::Csv)] {
            let back = parse_numeric_file(body.as_bytes(), fmt).unwrap();
            prop_assert!(back.values().iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.len(), values.len());
        }
    }
}
