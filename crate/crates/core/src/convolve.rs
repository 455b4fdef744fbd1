//! Full linear convolution. Long kernels go through a single zero-padded FFT;
//! short ones are convolved directly.

use alloc::vec;
use alloc::vec::Vec;

use crate::buffer::{AudioBuffer, ImpulseResponse};
use crate::error::{check_rate, Result};
use crate::fft;

/// Kernel length above which the FFT path is used.
pub const FAST_THRESHOLD: usize = 1024;

/// Convolves a mono buffer with an impulse response.
/// Output length is `signal.len() + ir.len() - 1`.
pub fn convolve(signal: &AudioBuffer, ir: &ImpulseResponse) -> Result<AudioBuffer> {
    check_rate(signal.sample_rate(), ir.sample_rate())?;
    let x = signal.expect_mono()?;
    AudioBuffer::mono(signal.sample_rate(), convolve_slices(x, ir.samples()))
}

/// Slice-level convolution, picking the direct or FFT route by kernel length.
///
/// Only the non-zero spans of both operands are convolved, so samples that
/// are structurally zero (e.g. before the onset) stay exactly zero instead
/// of picking up FFT round-off.
pub fn convolve_slices(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; signal.len() + kernel.len() - 1];
    let (Some((xs, x)), Some((hs, h))) = (nonzero_span(signal), nonzero_span(kernel)) else {
        return out;
    };
    let y = if h.len().min(x.len()) > FAST_THRESHOLD {
        convolve_fft(x, h)
    } else {
        convolve_direct(x, h)
    };
    out[xs + hs..xs + hs + y.len()].copy_from_slice(&y);
    out
}

fn nonzero_span(x: &[f64]) -> Option<(usize, &[f64])> {
    let start = x.iter().position(|&v| v != 0.0)?;
    let end = x.iter().rposition(|&v| v != 0.0)? + 1;
    Some((start, &x[start..end]))
}

pub fn convolve_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; signal.len() + kernel.len() - 1];
    for (i, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &h) in out[i..].iter_mut().zip(kernel) {
            *o += x * h;
        }
    }
    out
}

pub fn convolve_fft(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let n = out_len.next_power_of_two();
    let mut a = fft::forward_real(signal, n);
    let b = fft::forward_real(kernel, n);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft::inverse(&mut a);
    a.truncate(out_len);
    a.into_iter().map(|c| c.re).collect()
}
