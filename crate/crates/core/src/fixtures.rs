//! Synthetic room impulse responses for tests, acceptance runs and demos.
//!
//! A fixture is a direct impulse followed by exponentially decaying Gaussian
//! noise, optionally coloured by a biquad. The noise tail is scaled to unit
//! expected energy, so `direct_amplitude²` is the direct-to-reverberant
//! energy ratio.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::buffer::ImpulseResponse;
use crate::error::{Error, Result};
use crate::math;

/// `ln(1000)`: an amplitude envelope `exp(-k·t/t60)` is 60 dB down at `t60`.
pub const DECAY_60DB: f64 = 6.907_755_278_982_137;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coloration {
    None,
    /// Peaking cut of `depth_db` at `f0` with quality factor `q`.
    Notch { f0: f64, depth_db: f64, q: f64 },
    /// Second-order Butterworth low-pass.
    Lowpass { fc: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRirParams {
    pub sample_rate: u32,
    pub length_ms: f64,
    pub direct_amplitude: f64,
    pub direct_delay_ms: f64,
    pub t60_ms: f64,
    pub coloration: Coloration,
    pub seed: u64,
}

impl Default for SyntheticRirParams {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            length_ms: 900.0,
            direct_amplitude: 1.0,
            direct_delay_ms: 5.0,
            t60_ms: 300.0,
            coloration: Coloration::None,
            seed: 0,
        }
    }
}

impl SyntheticRirParams {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        if !(self.t60_ms > 0.0) || !self.t60_ms.is_finite() {
            return Err(Error::invalid("t60_ms", "must be positive"));
        }
        if !(self.length_ms > 0.0) || !self.length_ms.is_finite() {
            return Err(Error::invalid("length_ms", "must be positive"));
        }
        if !(self.direct_amplitude >= 0.0) || !self.direct_amplitude.is_finite() {
            return Err(Error::invalid("direct_amplitude", "must be finite and >= 0"));
        }
        if !(self.direct_delay_ms >= 0.0) || !(self.direct_delay_ms < self.length_ms) {
            return Err(Error::invalid("direct_delay_ms", "must lie within the response length"));
        }
        match self.coloration {
            Coloration::None => {}
            Coloration::Notch { f0, depth_db, q } => {
                if !(f0 > 0.0 && f0 < nyquist) {
                    return Err(Error::invalid("notch.f0", "must lie between 0 and Nyquist"));
                }
                if !(depth_db >= 0.0) || !depth_db.is_finite() {
                    return Err(Error::invalid("notch.depth_db", "must be finite and >= 0"));
                }
                if !(q > 0.0) || !q.is_finite() {
                    return Err(Error::invalid("notch.q", "must be positive"));
                }
            }
            Coloration::Lowpass { fc } => {
                if !(fc > 0.0 && fc < nyquist) {
                    return Err(Error::invalid("lowpass.fc", "must lie between 0 and Nyquist"));
                }
            }
        }
        Ok(())
    }

    /// Non-fatal issues with the parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.length_ms < 3.0 * self.t60_ms {
            out.push(alloc::format!(
                "length {} ms is shorter than 3 x t60 ({} ms); the decay is truncated",
                self.length_ms,
                3.0 * self.t60_ms
            ));
        }
        out
    }

    pub fn describe(&self) -> String {
        let color = match self.coloration {
            Coloration::None => String::from("none"),
            Coloration::Notch { f0, depth_db, q } => {
                alloc::format!("notch {f0} Hz, {depth_db} dB deep, Q {q}")
            }
            Coloration::Lowpass { fc } => alloc::format!("low-pass {fc} Hz"),
        };
        alloc::format!("t60 {} ms, coloration {color}", self.t60_ms)
    }
}

/// Builds the fixture. Deterministic for a given parameter set.
pub fn synth_rir(params: &SyntheticRirParams) -> Result<ImpulseResponse> {
    params.validate()?;
    let fs = params.sample_rate as f64;
    let len = (math::round(params.length_ms * fs / 1000.0) as usize).max(1);
    let direct = crate::buffer::delay_samples(params.direct_delay_ms, params.sample_rate).min(len - 1);
    let rate = DECAY_60DB / (params.t60_ms / 1000.0 * fs);

    let envelope: Vec<f64> = (1..len - direct).map(|k| math::exp(-rate * k as f64)).collect();
    let envelope_energy: f64 = envelope.iter().map(|e| e * e).sum();
    let scale = if envelope_energy > 0.0 {
        1.0 / math::sqrt(envelope_energy)
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut samples = vec![0.0; len];
    samples[direct] = params.direct_amplitude;
    for (s, e) in samples[direct + 1..].iter_mut().zip(&envelope) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s = z * e * scale;
    }

    if let Some(mut filter) = Biquad::for_coloration(params.coloration, fs) {
        filter.process(&mut samples);
    }
    ImpulseResponse::new(params.sample_rate, samples, "synthetic")
}

/// Direct-form-I biquad with normalised coefficients.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Peaking filter with gain `gain_db` at `f0`.
    pub fn peaking(f0: f64, gain_db: f64, q: f64, fs: f64) -> Self {
        let amp = math::powf(10.0, gain_db / 40.0);
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = math::sin(w0) / (2.0 * q);
        let cos = math::cos(w0);
        let a0 = 1.0 + alpha / amp;
        Self {
            b: [(1.0 + alpha * amp) / a0, -2.0 * cos / a0, (1.0 - alpha * amp) / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha / amp) / a0],
        }
    }

    pub fn lowpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = math::sin(w0) / (2.0 * q);
        let cos = math::cos(w0);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 - cos) / 2.0 / a0;
        Self {
            b: [b0, (1.0 - cos) / a0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn for_coloration(coloration: Coloration, fs: f64) -> Option<Self> {
        match coloration {
            Coloration::None => None,
            Coloration::Notch { f0, depth_db, q } => Some(Self::peaking(f0, -depth_db, q, fs)),
            Coloration::Lowpass { fc } => Some(Self::lowpass(fc, core::f64::consts::FRAC_1_SQRT_2, fs)),
        }
    }

    pub fn process(&mut self, samples: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in samples.iter_mut() {
            let x = *s;
            let y = self.b[0] * x + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }
}

/// A named fixture from the pinned suite.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFixture {
    pub name: &'static str,
    pub params: SyntheticRirParams,
}

/// Flat, 1 kHz notch (15 dB) and 8 kHz low-pass, each at t60 200 and 500 ms.
pub fn default_suite(sample_rate: u32) -> Vec<NamedFixture> {
    let colorations = [
        ("flat", Coloration::None),
        (
            "notch1k",
            Coloration::Notch {
                f0: 1000.0,
                depth_db: 15.0,
                q: 2.0,
            },
        ),
        ("lowpass8k", Coloration::Lowpass { fc: 8000.0 }),
    ];
    let names = [
        ["flat_t200", "flat_t500"],
        ["notch1k_t200", "notch1k_t500"],
        ["lowpass8k_t200", "lowpass8k_t500"],
    ];
    let mut out = Vec::new();
    for (ci, (_, coloration)) in colorations.iter().enumerate() {
        for (ti, t60) in [200.0, 500.0].into_iter().enumerate() {
            out.push(NamedFixture {
                name: names[ci][ti],
                params: SyntheticRirParams {
                    sample_rate,
                    length_ms: 3.0 * t60,
                    t60_ms: t60,
                    coloration: *coloration,
                    seed: 100 + (ci * 10 + ti) as u64,
                    ..Default::default()
                },
            });
        }
    }
    out
}

/// Primary left/right with a 15 dB notch at 1 kHz and flat supports, all with
/// t60 300 ms, in [`crate::Channel`] order.
pub fn notch_scenario(sample_rate: u32) -> [SyntheticRirParams; 4] {
    let notch = Coloration::Notch {
        f0: 1000.0,
        depth_db: 15.0,
        q: 2.0,
    };
    let base = SyntheticRirParams {
        sample_rate,
        length_ms: 900.0,
        t60_ms: 300.0,
        ..Default::default()
    };
    [
        SyntheticRirParams {
            coloration: notch,
            seed: 11,
            ..base.clone()
        },
        SyntheticRirParams {
            coloration: notch,
            seed: 12,
            ..base.clone()
        },
        SyntheticRirParams {
            direct_delay_ms: 3.0,
            seed: 21,
            ..base.clone()
        },
        SyntheticRirParams {
            direct_delay_ms: 3.0,
            seed: 22,
            ..base
        },
    ]
}
