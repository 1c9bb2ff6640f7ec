//! Mono WAV (PCM16 or float32) and headerless little-endian `.f32` audio.

use std::fs;
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvqError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub format: SampleFormat,
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn wav_err(e: hound::Error) -> RvqError {
    match e {
        hound::Error::IoError(io) => RvqError::Io(io),
        other => RvqError::format("wav", other.to_string()),
    }
}

/// Reads a `.wav` file, or raw `.f32` samples at `raw_rate`.
pub fn read_audio(path: impl AsRef<Path>, raw_rate: Option<u32>) -> Result<Audio> {
    let path = path.as_ref();
    if !is_wav(path) {
        let rate =
            raw_rate.ok_or_else(|| RvqError::arg("raw audio needs an explicit sample rate"))?;
        return Ok(Audio {
            samples: read_raw_f32(path)?,
            sample_rate: rate,
            format: SampleFormat::Float32,
        });
    }
    let reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(RvqError::format(
            "channels",
            format!("expected mono, found {} channels", spec.channels),
        ));
    }
    let (samples, format) = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, 16) => (
            reader
                .into_samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(wav_err)?,
            SampleFormat::Pcm16,
        ),
        (HoundFormat::Float, 32) => (
            reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(wav_err)?,
            SampleFormat::Float32,
        ),
        (fmt, bits) => {
            return Err(RvqError::format(
                "sample_format",
                format!("unsupported {bits}-bit {fmt:?} samples (need PCM16 or float32)"),
            ))
        }
    };
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
        format,
    })
}

/// Writes a `.wav` in `audio.format`, or raw `.f32` for any other extension.
pub fn write_audio(path: impl AsRef<Path>, audio: &Audio) -> Result<()> {
    let path = path.as_ref();
    if !is_wav(path) {
        return write_raw_f32(path, &audio.samples);
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: match audio.format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match audio.format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut w = WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &audio.samples {
        match audio.format {
            SampleFormat::Pcm16 => {
                let v = (s * 32768.0)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                w.write_sample(v).map_err(wav_err)?;
            }
            SampleFormat::Float32 => w.write_sample(s as f32).map_err(wav_err)?,
        }
    }
    w.finalize().map_err(wav_err)
}

pub fn read_raw_f32(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(RvqError::format(
            "payload",
            format!("{} bytes is not a whole number of f32 values", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect())
}

pub fn write_raw_f32(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = samples
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes)?;
    Ok(())
}
