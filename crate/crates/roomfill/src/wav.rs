//! WAV reading and writing through `hound`.
//!
//! Integer PCM (16, 24 or 32 bit) is scaled to [-1, 1); 32-bit float is read
//! as is. 8-bit files are rejected.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use roomfill_core::{AudioBuffer, ImpulseResponse};

use crate::error::{AppError, AppResult};

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum WavFormat {
    #[default]
    Float32,
    Pcm16,
    Pcm24,
}

impl WavFormat {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavFormat::Float32 => (32, SampleFormat::Float),
            WavFormat::Pcm16 => (16, SampleFormat::Int),
            WavFormat::Pcm24 => (24, SampleFormat::Int),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

/// What a write had to do to fit the samples into the format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    /// Samples outside [-1, 1] that were clipped (integer formats only).
    pub clipped: usize,
}

pub fn read_wav(path: &Path) -> AppResult<AudioBuffer> {
    let wav_err = |source| AppError::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
        (format, bits) => {
            return Err(AppError::format(
                path,
                format!("unsupported sample format: {bits}-bit {format:?} (use 16/24/32-bit PCM or 32-bit float)"),
            ))
        }
    };
    if channels == 0 {
        return Err(AppError::format(path, "no channels"));
    }
    let frames = interleaved.len() / channels;
    let mut out = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &v) in frame.iter().enumerate() {
            out[c].push(v);
        }
    }
    AudioBuffer::new(spec.sample_rate, out).map_err(AppError::from)
}

/// Reads a mono file as an impulse response labelled with the file name.
pub fn read_ir(path: &Path) -> AppResult<ImpulseResponse> {
    let buffer = read_wav(path)?;
    if buffer.num_channels() != 1 {
        return Err(AppError::format(
            path,
            format!("impulse responses must be mono, found {} channels", buffer.num_channels()),
        ));
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    ImpulseResponse::from_buffer(&buffer, label).map_err(|e| AppError::format(path, e.to_string()))
}

pub fn write_wav(path: &Path, buffer: &AudioBuffer, format: WavFormat) -> AppResult<WriteReport> {
    let wav_err = |source| AppError::Wav {
        path: path.to_path_buf(),
        source,
    };
    let channels = u16::try_from(buffer.num_channels())
        .map_err(|_| AppError::format(path, "too many channels for WAV"))?;
    let mut writer = WavWriter::create(path, format.spec(channels, buffer.sample_rate())).map_err(wav_err)?;
    let mut report = WriteReport::default();
    for n in 0..buffer.len() {
        for c in 0..buffer.num_channels() {
            let v = buffer.channel(c)[n];
            match format {
                WavFormat::Float32 => writer.write_sample(v as f32).map_err(wav_err)?,
                WavFormat::Pcm16 | WavFormat::Pcm24 => {
                    let bits = if format == WavFormat::Pcm16 { 16 } else { 24 };
                    let full = (1i64 << (bits - 1)) as f64;
                    let scaled = (v * full).round();
                    let clamped = scaled.clamp(-full, full - 1.0);
                    if clamped != scaled {
                        report.clipped += 1;
                    }
                    writer.write_sample(clamped as i32).map_err(wav_err)?;
                }
            }
        }
    }
    writer.finalize().map_err(wav_err)?;
    Ok(report)
}

pub fn write_ir(path: &Path, ir: &ImpulseResponse, format: WavFormat) -> AppResult<WriteReport> {
    write_wav(path, &ir.to_buffer(), format)
}
