//! Random-phase all-pass FIR used to decorrelate the supporting loudspeakers
//! from the primaries and from each other.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::convolve::convolve_slices;
use crate::error::{Error, Result};
use crate::fft;

pub const DEFAULT_LENGTH: usize = 1024;
pub const DEFAULT_SEED_LEFT: u64 = 1;
pub const DEFAULT_SEED_RIGHT: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelatorFilter {
    taps: Vec<f64>,
    seed: u64,
}

/// Unit magnitude at every bin of a `length`-point FFT with seeded uniform
/// phases in (−π, π]; DC and Nyquist stay at phase 0 and the spectrum is
/// conjugate-symmetric, so the taps are real.
pub fn design_decorrelator(length: usize, seed: u64) -> Result<DecorrelatorFilter> {
    if !length.is_power_of_two() || length < 256 {
        return Err(Error::invalid(
            "decorrelator_len",
            alloc::format!("{length} is not a power of two >= 256"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = length / 2;
    let mut spectrum = alloc::vec![Complex64::new(0.0, 0.0); length];
    spectrum[0] = Complex64::new(1.0, 0.0);
    spectrum[half] = Complex64::new(1.0, 0.0);
    for k in 1..half {
        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let phase = PI - 2.0 * PI * unit;
        let bin = Complex64::from_polar(1.0, phase);
        spectrum[k] = bin;
        spectrum[length - k] = bin.conj();
    }
    fft::inverse(&mut spectrum);
    Ok(DecorrelatorFilter {
        taps: spectrum.into_iter().map(|c| c.re).collect(),
        seed,
    })
}

impl DecorrelatorFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Index of the largest-magnitude tap; the lag at which this filter
    /// correlates most strongly with its input.
    pub fn peak_lag(&self) -> usize {
        self.taps
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
            .0
    }

    /// Linear convolution; output is `signal.len() + len() - 1` long.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        convolve_slices(signal, &self.taps)
    }

    /// Circular convolution over one filter period. `block` must be exactly
    /// `len()` samples; energy is preserved exactly.
    pub fn apply_circular(&self, block: &[f64]) -> Result<Vec<f64>> {
        if block.len() != self.taps.len() {
            return Err(Error::LengthMismatch {
                expected: self.taps.len(),
                found: block.len(),
            });
        }
        let n = self.taps.len();
        let mut x = fft::forward_real(block, n);
        let h = fft::forward_real(&self.taps, n);
        for (a, b) in x.iter_mut().zip(&h) {
            *a *= b;
        }
        fft::inverse(&mut x);
        Ok(x.into_iter().map(|c| c.re).collect())
    }
}

/// Peak of the normalised cross-correlation between two filters over all lags.
pub fn peak_cross_correlation(a: &[f64], b: &[f64]) -> f64 {
    let norm = libm::sqrt(crate::energy(a) * crate::energy(b));
    if norm == 0.0 {
        return 0.0;
    }
    let reversed: Vec<f64> = b.iter().rev().copied().collect();
    convolve_slices(a, &reversed)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        / norm
}
