//! Sampled audio containers and the few sample-domain operations every other
//! module leans on.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Multi-channel audio at a fixed sample rate. Samples are `f64` with nominal
/// full scale at ±1.0; nothing in the processing chain clips.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        let Some(first) = channels.first() else {
            return Err(Error::invalid("channels", "at least one channel is required"));
        };
        let len = first.len();
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                found: bad.len(),
            });
        }
        Ok(Self {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    /// All-zero buffer.
    pub fn silence(sample_rate: u32, channels: usize, len: usize) -> Result<Self> {
        Self::new(sample_rate, vec![vec![0.0; len]; channels.max(1)])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Frames per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Returns the single channel of a mono buffer.
    pub fn expect_mono(&self) -> Result<&[f64]> {
        if self.channels.len() != 1 {
            return Err(Error::invalid(
                "channels",
                alloc::format!("expected a mono buffer, got {} channels", self.channels.len()),
            ));
        }
        Ok(&self.channels[0])
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|x| x * gain).collect())
                .collect(),
        }
    }
}

/// A single-channel room impulse response with a free-text label
/// such as `primary_left`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    sample_rate: u32,
    samples: Vec<f64>,
    label: String,
}

impl ImpulseResponse {
    pub fn new(sample_rate: u32, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("impulse_response", "must hold at least one sample"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "impulse_response",
                alloc::format!("non-finite value at sample {i}"),
            ));
        }
        Ok(Self {
            sample_rate,
            samples,
            label: label.into(),
        })
    }

    /// Unit impulse of the given length.
    pub fn unit(sample_rate: u32, len: usize) -> Result<Self> {
        let mut samples = vec![0.0; len.max(1)];
        samples[0] = 1.0;
        Self::new(sample_rate, samples, "unit")
    }

    pub fn from_buffer(buffer: &AudioBuffer, label: impl Into<String>) -> Result<Self> {
        Self::new(buffer.sample_rate(), buffer.expect_mono()?.to_vec(), label)
    }

    pub fn to_buffer(&self) -> AudioBuffer {
        AudioBuffer {
            sample_rate: self.sample_rate,
            channels: vec![self.samples.clone()],
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|x| x * gain).collect(),
            label: self.label.clone(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Number of whole samples for a delay in milliseconds, rounded to nearest.
pub fn delay_samples(delay_ms: f64, sample_rate: u32) -> usize {
    math::round(delay_ms * sample_rate as f64 / 1000.0) as usize
}

/// Prepends `round(delay_ms * fs / 1000)` zeros to every channel.
pub fn delay(signal: &AudioBuffer, delay_ms: f64) -> Result<AudioBuffer> {
    if !(delay_ms >= 0.0) || !delay_ms.is_finite() {
        return Err(Error::invalid("delay_ms", "must be a finite value >= 0"));
    }
    let n = delay_samples(delay_ms, signal.sample_rate);
    let channels = signal
        .channels
        .iter()
        .map(|c| {
            let mut out = vec![0.0; n + c.len()];
            out[n..].copy_from_slice(c);
            out
        })
        .collect();
    Ok(AudioBuffer {
        sample_rate: signal.sample_rate,
        channels,
    })
}

/// Sum of squared samples.
pub fn energy(samples: &[f64]) -> f64 {
    samples.iter().map(|x| x * x).sum()
}
