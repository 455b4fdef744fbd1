//! The sloped spectral target the total sound field is equalised to.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Log-linear ramp: `level(f) = offset − slope · log2(f/f_lo) / log2(f_hi/f_lo)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFunction {
    /// Drop in dB from `f_ref_low` to `f_ref_high`.
    pub slope_db: f64,
    pub f_ref_low: f64,
    pub f_ref_high: f64,
    /// Level at `f_ref_low`. Solved per channel by the fill solver.
    pub offset_db: f64,
}

impl Default for TargetFunction {
    fn default() -> Self {
        Self {
            slope_db: 5.0,
            f_ref_low: 20.0,
            f_ref_high: 20_000.0,
            offset_db: 0.0,
        }
    }
}

impl TargetFunction {
    pub fn validate(&self) -> Result<()> {
        if !self.slope_db.is_finite() {
            return Err(Error::invalid("slope_db", "must be finite"));
        }
        if !(self.f_ref_low > 0.0) || !self.f_ref_low.is_finite() {
            return Err(Error::invalid("f_ref_low", "must be positive"));
        }
        if !(self.f_ref_high > self.f_ref_low) || !self.f_ref_high.is_finite() {
            return Err(Error::invalid("f_ref_high", "must be above f_ref_low"));
        }
        if !self.offset_db.is_finite() {
            return Err(Error::invalid("offset_db", "must be finite"));
        }
        Ok(())
    }

    pub fn with_offset(self, offset_db: f64) -> Self {
        Self { offset_db, ..self }
    }

    /// Target level in dB at `freq`.
    pub fn level_at(&self, freq: f64) -> f64 {
        let position = math::log2(freq / self.f_ref_low) / math::log2(self.f_ref_high / self.f_ref_low);
        self.offset_db - self.slope_db * position
    }

    /// Per-band target energies: the unit-impulse band energy raised by the
    /// ramp level at each centre frequency.
    pub fn band_targets(&self, center_freqs: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
        if center_freqs.len() != reference.len() {
            return Err(Error::LengthMismatch {
                expected: center_freqs.len(),
                found: reference.len(),
            });
        }
        Ok(center_freqs
            .iter()
            .zip(reference)
            .map(|(&f, &e)| math::undb10(self.level_at(f)) * e)
            .collect())
    }
}
