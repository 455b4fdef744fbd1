//! Complex gammatone analysis/synthesis filterbank on the ERB scale.
//!
//! Each band is a cascade of four identical complex one-pole sections with
//! pole `λ·e^{i·2π·fc/fs}`. Its output is an analytic band signal: a real
//! sinusoid at the band centre comes out with unit envelope, and the real part
//! is the band-passed signal.
//!
//! Resynthesis delays every band so envelope maxima line up at a common
//! latency (4 ms), rotates the phase so each band is real and positive at that
//! instant, weights the bands and sums real parts. The weights are solved so
//! that resynthesising a unit impulse restores every band's own impulse
//! energy; a flat reconstruction is the fixed point of that condition.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_rate, Error, Result};
use crate::math;

/// Filter order (number of cascaded one-pole sections).
pub const ORDER: usize = 4;

/// Common latency the synthesis aligns band envelopes to.
pub const SYNTHESIS_DELAY_MS: f64 = 4.0;

/// Ratio between the pole bandwidth parameter and the ERB it yields for an
/// order-4 gammatone: `1 / a_4` with
/// `a_γ = π (2γ-2)! 2^{-(2γ-2)} / ((γ-1)!)^2`, i.e. `64·36 / (720π)`.
pub const BANDWIDTH_FACTOR: f64 = 64.0 * 36.0 / (720.0 * PI);

const ERB_SLOPE: f64 = 4.37 / 1000.0;
const ERB_MIN: f64 = 24.7;
// Ringing is kept until the lowest band has decayed by roughly e^-40.
const TAIL_DECAY_CONSTANTS: f64 = 40.0;
// Bands further apart than this on the ERB-number scale do not interact in
// the synthesis weight solve.
const COUPLING_ERBS: f64 = 8.0;

/// Reconstruction is held flat over `[f_low·FLAT_EDGE_LOW, f_high·FLAT_EDGE_HIGH]`.
pub const FLAT_EDGE_LOW: f64 = 1.25;
pub const FLAT_EDGE_HIGH: f64 = 0.8;

/// Glasberg–Moore equivalent rectangular bandwidth in Hz.
pub fn erb(freq: f64) -> Result<f64> {
    if !(freq > 0.0) || !freq.is_finite() {
        return Err(Error::invalid("freq", "ERB is defined for positive frequencies"));
    }
    Ok(erb_unchecked(freq))
}

fn erb_unchecked(freq: f64) -> f64 {
    ERB_MIN * (ERB_SLOPE * freq + 1.0)
}

/// ERB-number: the integral of `1/ERB(f)` from 0 to `freq`.
pub fn erb_number(freq: f64) -> f64 {
    math::ln(1.0 + ERB_SLOPE * freq) / (ERB_MIN * ERB_SLOPE)
}

/// Inverse of [`erb_number`].
pub fn erb_number_to_hz(number: f64) -> f64 {
    (math::exp(number * ERB_MIN * ERB_SLOPE) - 1.0) / ERB_SLOPE
}

/// Band layout: centre frequencies on a uniform ERB-number grid and their
/// ERB bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankSpec {
    sample_rate: u32,
    f_low: f64,
    f_high: f64,
    bands_per_erb: f64,
    center_freqs: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl FilterbankSpec {
    /// Lays out bands `1/bands_per_erb` ERB apart, centred in
    /// `[f_low, f_high]` so both ends sit within half a step of the range.
    /// `f_low == f_high` yields a single band.
    pub fn new(sample_rate: u32, f_low: f64, f_high: f64, bands_per_erb: f64) -> Result<Self> {
        check_range(sample_rate, f_low, f_high)?;
        if !(bands_per_erb >= 1.0) || !bands_per_erb.is_finite() {
            return Err(Error::invalid("bands_per_erb", "must be >= 1"));
        }
        let lo = erb_number(f_low);
        let span = erb_number(f_high) - lo;
        let step = 1.0 / bands_per_erb;
        let steps = math::floor(span * bands_per_erb + 1e-9) as usize;
        let margin = (span - steps as f64 * step).max(0.0) / 2.0;
        let center_freqs: Vec<f64> = (0..=steps)
            .map(|k| {
                let f = erb_number_to_hz(lo + margin + k as f64 * step);
                f.clamp(f_low, f_high)
            })
            .collect();
        let bandwidths = center_freqs.iter().map(|&f| erb_unchecked(f)).collect();
        Ok(Self {
            sample_rate,
            f_low,
            f_high,
            bands_per_erb,
            center_freqs,
            bandwidths,
        })
    }

    /// 80 Hz to 16 kHz, one band per ERB.
    pub fn default_for(sample_rate: u32) -> Result<Self> {
        Self::new(sample_rate, 80.0, 16_000.0, 1.0)
    }

    /// Rebuilds a spec from stored band lists, checking every invariant.
    pub fn from_bands(
        sample_rate: u32,
        f_low: f64,
        f_high: f64,
        bands_per_erb: f64,
        center_freqs: Vec<f64>,
        bandwidths: Vec<f64>,
    ) -> Result<Self> {
        check_range(sample_rate, f_low, f_high)?;
        if center_freqs.is_empty() {
            return Err(Error::invalid("center_freqs", "at least one band is required"));
        }
        if center_freqs.len() != bandwidths.len() {
            return Err(Error::LengthMismatch {
                expected: center_freqs.len(),
                found: bandwidths.len(),
            });
        }
        if center_freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("center_freqs", "must be strictly increasing"));
        }
        if center_freqs[0] < f_low || center_freqs[center_freqs.len() - 1] > f_high {
            return Err(Error::invalid("center_freqs", "must lie within [f_low, f_high]"));
        }
        for (&f, &bw) in center_freqs.iter().zip(&bandwidths) {
            let expected = erb_unchecked(f);
            if !((bw - expected).abs() <= 1e-9 * expected) {
                return Err(Error::invalid(
                    "bandwidths",
                    alloc::format!("bandwidth {bw} Hz at {f} Hz is not ERB({f}) = {expected} Hz"),
                ));
            }
        }
        Ok(Self {
            sample_rate,
            f_low,
            f_high,
            bands_per_erb,
            center_freqs,
            bandwidths,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
    pub fn f_low(&self) -> f64 {
        self.f_low
    }
    pub fn f_high(&self) -> f64 {
        self.f_high
    }
    pub fn bands_per_erb(&self) -> f64 {
        self.bands_per_erb
    }
    pub fn order(&self) -> usize {
        ORDER
    }
    pub fn center_freqs(&self) -> &[f64] {
        &self.center_freqs
    }
    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }
    pub fn num_bands(&self) -> usize {
        self.center_freqs.len()
    }
}

fn check_range(sample_rate: u32, f_low: f64, f_high: f64) -> Result<()> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample_rate", "must be positive"));
    }
    if !(f_low > 0.0) {
        return Err(Error::invalid("f_low", "must be positive"));
    }
    if !(f_high >= f_low) {
        return Err(Error::invalid("f_high", "must not be below f_low"));
    }
    if !(f_high < sample_rate as f64 / 2.0) {
        return Err(Error::invalid("f_high", "must be below the Nyquist frequency"));
    }
    Ok(())
}

/// Analytic per-band signals produced by [`Filterbank::analyze`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandSignals {
    pub bands: Vec<Vec<Complex64>>,
}

impl BandSignals {
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// Samples per band (all bands share one length).
    pub fn len(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multiplies each band by its gain.
    pub fn apply_gains(&mut self, gains: &[f64]) -> Result<()> {
        if gains.len() != self.bands.len() {
            return Err(Error::LengthMismatch {
                expected: self.bands.len(),
                found: gains.len(),
            });
        }
        for (band, &g) in self.bands.iter_mut().zip(gains) {
            for x in band.iter_mut() {
                *x *= g;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct BandFilter {
    pole: Complex64,
    input_gain: f64,
}

impl BandFilter {
    fn design(fc: f64, bandwidth: f64, fs: f64) -> Self {
        let lambda = math::exp(-2.0 * PI * BANDWIDTH_FACTOR * bandwidth / fs);
        let theta = 2.0 * PI * fc / fs;
        Self {
            pole: Complex64::from_polar(lambda, theta),
            input_gain: 2.0 * math::powf(1.0 - lambda, ORDER as f64),
        }
    }

    fn radius(&self) -> f64 {
        self.pole.norm()
    }

    /// Frequency response at normalised angular frequency `w`.
    fn response(&self, w: f64) -> Complex64 {
        let z = Complex64::new(1.0, 0.0) - self.pole * Complex64::from_polar(1.0, -w);
        self.input_gain / (z * z * z * z)
    }

    /// Impulse response sample `g·C(n+3, 3)·a^n`.
    fn impulse_at(&self, n: usize) -> Complex64 {
        let nf = n as f64;
        let binom = (nf + 1.0) * (nf + 2.0) * (nf + 3.0) / 6.0;
        self.pole.powu(n as u32) * (self.input_gain * binom)
    }

    /// Filters `input` (implicitly zero-padded) for `out_len` samples.
    fn run(&self, input: &[f64], out_len: usize) -> Vec<Complex64> {
        let mut state = [Complex64::new(0.0, 0.0); ORDER];
        let mut out = Vec::with_capacity(out_len);
        for n in 0..out_len {
            let x = input.get(n).copied().unwrap_or(0.0);
            let mut v = Complex64::new(x * self.input_gain, 0.0);
            for s in state.iter_mut() {
                *s = v + self.pole * *s;
                v = *s;
            }
            out.push(v);
        }
        out
    }

    fn energy(&self, input: &[f64], out_len: usize) -> f64 {
        let mut state = [Complex64::new(0.0, 0.0); ORDER];
        let mut acc = 0.0;
        for n in 0..out_len {
            let x = input.get(n).copied().unwrap_or(0.0);
            let mut v = Complex64::new(x * self.input_gain, 0.0);
            for s in state.iter_mut() {
                *s = v + self.pole * *s;
                v = *s;
            }
            acc += v.norm_sqr();
        }
        acc
    }
}

#[derive(Debug, Clone)]
struct Synthesis {
    latency: usize,
    delays: Vec<usize>,
    phases: Vec<Complex64>,
    weights: Vec<f64>,
}

/// A designed filterbank: analysis filters, synthesis alignment and weights,
/// and the per-band energy of a unit impulse.
#[derive(Debug, Clone)]
pub struct Filterbank {
    spec: FilterbankSpec,
    filters: Vec<BandFilter>,
    tail_len: usize,
    synthesis: Synthesis,
    reference: Vec<f64>,
}

impl Filterbank {
    pub fn new(spec: FilterbankSpec) -> Self {
        let fs = spec.sample_rate as f64;
        let filters: Vec<BandFilter> = spec
            .center_freqs
            .iter()
            .zip(&spec.bandwidths)
            .map(|(&fc, &bw)| BandFilter::design(fc, bw, fs))
            .collect();
        let slowest = filters.iter().map(BandFilter::radius).fold(0.0, f64::max);
        let tail_len = math::ceil(TAIL_DECAY_CONSTANTS / (1.0 - slowest)) as usize;

        let unit = [1.0];
        let reference: Vec<f64> = filters.iter().map(|f| f.energy(&unit, tail_len + 1)).collect();

        let latency = crate::buffer::delay_samples(SYNTHESIS_DELAY_MS, spec.sample_rate);
        let synthesis = design_synthesis(&spec, &filters, &reference, latency, tail_len);

        Self {
            spec,
            filters,
            tail_len,
            synthesis,
            reference,
        }
    }

    pub fn spec(&self) -> &FilterbankSpec {
        &self.spec
    }

    pub fn num_bands(&self) -> usize {
        self.filters.len()
    }

    /// Samples after which the slowest band's ringing is negligible.
    pub fn tail_len(&self) -> usize {
        self.tail_len
    }

    /// Synthesis alignment latency in samples.
    pub fn latency(&self) -> usize {
        self.synthesis.latency
    }

    /// Length of an equaliser impulse response that holds the full
    /// resynthesised ringing of every band.
    pub fn eq_len(&self) -> usize {
        self.synthesis.latency + self.tail_len + 1
    }

    /// Per-band delays applied before summation.
    pub fn synthesis_delays(&self) -> &[usize] {
        &self.synthesis.delays
    }

    pub fn synthesis_weights(&self) -> &[f64] {
        &self.synthesis.weights
    }

    /// Band energies of a unit impulse.
    pub fn reference_energies(&self) -> &[f64] {
        &self.reference
    }

    /// Splits a real signal into analytic band signals of the same length.
    pub fn analyze(&self, signal: &[f64]) -> BandSignals {
        self.analyze_padded(signal, signal.len())
    }

    /// Like [`analyze`](Self::analyze) but runs the filters for `out_len`
    /// samples, zero-padding the input.
    pub fn analyze_padded(&self, signal: &[f64], out_len: usize) -> BandSignals {
        BandSignals {
            bands: self.filters.iter().map(|f| f.run(signal, out_len)).collect(),
        }
    }

    /// Analyses a buffer after checking its rate and channel count.
    pub fn analyze_buffer(&self, signal: &crate::AudioBuffer) -> Result<BandSignals> {
        check_rate(self.spec.sample_rate, signal.sample_rate())?;
        Ok(self.analyze(signal.expect_mono()?))
    }

    /// Recombines band signals into a real signal of the same length.
    pub fn synthesize(&self, bands: &BandSignals) -> Result<Vec<f64>> {
        if bands.num_bands() != self.num_bands() {
            return Err(Error::LengthMismatch {
                expected: self.num_bands(),
                found: bands.num_bands(),
            });
        }
        let len = bands.len();
        if let Some(bad) = bands.bands.iter().find(|b| b.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                found: bad.len(),
            });
        }
        let s = &self.synthesis;
        let mut out = vec![0.0; len];
        for (b, band) in bands.bands.iter().enumerate() {
            let d = s.delays[b];
            if d >= len {
                continue;
            }
            let rot = s.phases[b] * s.weights[b];
            for (o, x) in out[d..].iter_mut().zip(band) {
                *o += (rot * x).re;
            }
        }
        Ok(out)
    }

    /// `E_b = Σ |band_b[n]|²`, including the filters' ringing past the end of
    /// the input.
    pub fn band_energies(&self, signal: &[f64]) -> Vec<f64> {
        let out_len = signal.len() + self.tail_len;
        self.filters.iter().map(|f| f.energy(signal, out_len)).collect()
    }

    /// Energy of a single band; see [`band_energies`](Self::band_energies).
    pub fn band_energy(&self, signal: &[f64], band: usize) -> f64 {
        self.filters[band].energy(signal, signal.len() + self.tail_len)
    }

    /// Analysis response of `band` at normalised angular frequency `w`.
    pub fn band_response(&self, band: usize, w: f64) -> Complex64 {
        self.filters[band].response(w)
    }

    /// Response of `band`'s contribution to a resynthesised unit impulse at
    /// unit gain, so an equaliser built from gains `g` has the response
    /// `Σ g_b · eq_band_response(b, w)` (up to the negligible ringing cut at
    /// [`eq_len`](Self::eq_len)).
    pub fn eq_band_response(&self, band: usize, w: f64) -> Complex64 {
        let s = &self.synthesis;
        let rot = s.phases[band] * s.weights[band];
        let f = &self.filters[band];
        let re_part = (rot * f.response(w) + rot.conj() * f.response(-w).conj()) * 0.5;
        re_part * Complex64::from_polar(1.0, -w * s.delays[band] as f64)
    }

    /// Rate-checked [`band_energies`](Self::band_energies) for an impulse response.
    pub fn ir_band_energies(&self, ir: &crate::ImpulseResponse) -> Result<Vec<f64>> {
        check_rate(self.spec.sample_rate, ir.sample_rate())?;
        Ok(self.band_energies(ir.samples()))
    }
}

fn design_synthesis(
    spec: &FilterbankSpec,
    filters: &[BandFilter],
    reference: &[f64],
    latency: usize,
    tail_len: usize,
) -> Synthesis {
    let nb = filters.len();
    let fs = spec.sample_rate as f64;

    // |h_b[n]| = g·C(n+3, 3)·λ^n, so the envelope peak is where the ratio of
    // successive magnitudes drops below one.
    let peaks: Vec<usize> = filters
        .iter()
        .map(|f| {
            let lambda = f.radius();
            let mut n = 0usize;
            while (n as f64 + 4.0) / (n as f64 + 1.0) * lambda > 1.0 {
                n += 1;
            }
            n
        })
        .collect();
    let delays: Vec<usize> = peaks.iter().map(|&p| latency.saturating_sub(p)).collect();

    // The aligned responses have decayed to nothing well inside this length,
    // so Parseval on the grid matches time-domain energy.
    let grid = (latency + tail_len).next_power_of_two().max(1 << 10);
    let omega = |k: usize| 2.0 * PI * k as f64 / grid as f64;
    let responses: Vec<Vec<Complex64>> = filters
        .iter()
        .map(|f| (0..grid).map(|k| f.response(omega(k))).collect())
        .collect();

    // Bands whose envelope peaks by the latency are made real and positive at
    // that instant, which gives them a common linear phase. Slower bands keep
    // no delay; their phase is matched to the band above at the crossover
    // frequency so neighbours add rather than cancel there.
    let mut phases = vec![Complex64::new(1.0, 0.0); nb];
    for b in (0..nb).rev() {
        if peaks[b] <= latency || b + 1 == nb {
            let h = filters[b].impulse_at(latency - delays[b]);
            phases[b] = h.conj() / h.norm();
        } else {
            let crossover = erb_number_to_hz(
                0.5 * (erb_number(spec.center_freqs[b]) + erb_number(spec.center_freqs[b + 1])),
            );
            let w = 2.0 * PI * crossover / fs;
            let upper = phases[b + 1]
                * filters[b + 1].response(w)
                * Complex64::from_polar(1.0, -w * delays[b + 1] as f64);
            let lower = filters[b].response(w) * Complex64::from_polar(1.0, -w * delays[b] as f64);
            let rot = upper / lower;
            phases[b] = rot / rot.norm();
        }
    }

    // Spectrum of the real part of each aligned band: ½(p·H(ω) + conj(p·H(-ω))).
    let aligned: Vec<Vec<Complex64>> = (0..nb)
        .map(|j| {
            (0..grid)
                .map(|k| {
                    let neg = (grid - k) % grid;
                    let pos = phases[j] * responses[j][k];
                    let mirror = (phases[j] * responses[j][neg]).conj();
                    0.5 * (pos + mirror) * Complex64::from_polar(1.0, -omega(k) * delays[j] as f64)
                })
                .collect()
        })
        .collect();

    // Gram blocks: energy in analysis band b of Σ_j w_j r_j is w^T G_b w over
    // the bands j coupled to b (Parseval on the grid).
    let numbers: Vec<f64> = spec.center_freqs.iter().map(|&f| erb_number(f)).collect();
    let windows: Vec<(usize, usize)> = (0..nb)
        .map(|b| {
            let lo = numbers.iter().position(|&e| numbers[b] - e <= COUPLING_ERBS).unwrap_or(b);
            let hi = numbers.iter().rposition(|&e| e - numbers[b] <= COUPLING_ERBS).unwrap_or(b);
            (lo, hi + 1)
        })
        .collect();
    let grams: Vec<Vec<f64>> = (0..nb)
        .map(|b| {
            let (lo, hi) = windows[b];
            let m = hi - lo;
            let power: Vec<f64> = responses[b].iter().map(|h| h.norm_sqr()).collect();
            let floor = power.iter().fold(0.0f64, |a, &p| a.max(p)) * 1e-12;
            let mut g = vec![0.0; m * m];
            for (k, &p) in power.iter().enumerate() {
                if p < floor {
                    continue;
                }
                for i in 0..m {
                    let ri = aligned[lo + i][k];
                    for l in i..m {
                        g[i * m + l] += p * (ri * aligned[lo + l][k].conj()).re;
                    }
                }
            }
            for i in 0..m {
                for l in i..m {
                    g[i * m + l] /= grid as f64;
                    g[l * m + i] = g[i * m + l];
                }
            }
            g
        })
        .collect();

    // Flatness probes every quarter ERB over the range where the band layout
    // can be flat: a quarter ERB-band in from either end.
    let lo_probe = erb_number(spec.f_low * FLAT_EDGE_LOW);
    let hi_probe = erb_number(spec.f_high * FLAT_EDGE_HIGH);
    let probes: Vec<Vec<Complex64>> = if nb > 1 && hi_probe > lo_probe {
        let count = math::ceil((hi_probe - lo_probe) * 4.0) as usize;
        (0..=count)
            .map(|i| {
                let f = erb_number_to_hz(lo_probe + (hi_probe - lo_probe) * i as f64 / count as f64);
                let w = 2.0 * PI * f / fs;
                (0..nb)
                    .map(|j| {
                        let pos = phases[j] * filters[j].response(w);
                        let mirror = (phases[j] * filters[j].response(-w)).conj();
                        0.5 * (pos + mirror) * Complex64::from_polar(1.0, -w * delays[j] as f64)
                    })
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };

    let weights = solve_weights(&WeightFit {
        reference,
        windows: &windows,
        grams: &grams,
        probes: &probes,
    });
    Synthesis {
        latency,
        delays,
        phases,
        weights,
    }
}

fn quad_form(w: &[f64], (lo, hi): (usize, usize), g: &[f64]) -> f64 {
    let m = hi - lo;
    let mut acc = 0.0;
    for i in 0..m {
        for k in 0..m {
            acc += w[lo + i] * g[i * m + k] * w[lo + k];
        }
    }
    acc
}

/// Least-squares problem for the synthesis weights. Residuals are log
/// energies: `ln(w^T G_b w / reference_b)` for every band, and
/// `ln |Σ_j w_j R_j(f)|²` at flatness probe frequencies.
struct WeightFit<'a> {
    reference: &'a [f64],
    windows: &'a [(usize, usize)],
    grams: &'a [Vec<f64>],
    probes: &'a [Vec<Complex64>],
}

impl WeightFit<'_> {
    fn residuals(&self, w: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = (0..self.reference.len())
            .map(|b| math::ln(quad_form(w, self.windows[b], &self.grams[b]) / self.reference[b]))
            .collect();
        r.extend(self.probes.iter().map(|p| math::ln(sum_response(w, p).norm_sqr())));
        r
    }

    fn jacobian(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let nb = w.len();
        let mut rows = Vec::with_capacity(nb + self.probes.len());
        for b in 0..nb {
            let (lo, hi) = self.windows[b];
            let m = hi - lo;
            let e = quad_form(w, self.windows[b], &self.grams[b]);
            let mut row = vec![0.0; nb];
            for i in 0..m {
                let gw: f64 = (0..m).map(|k| self.grams[b][i * m + k] * w[lo + k]).sum();
                row[lo + i] = 2.0 * gw / e;
            }
            rows.push(row);
        }
        for p in self.probes {
            let x = sum_response(w, p);
            let e = x.norm_sqr();
            rows.push(p.iter().map(|r| 2.0 * (x.conj() * r).re / e).collect());
        }
        rows
    }
}

fn sum_response(w: &[f64], responses: &[Complex64]) -> Complex64 {
    w.iter().zip(responses).map(|(a, r)| r * *a).sum()
}

/// Damped Gauss-Newton on [`WeightFit`], keeping every weight positive.
fn solve_weights(fit: &WeightFit<'_>) -> Vec<f64> {
    let nb = fit.reference.len();
    let ones = vec![1.0; nb];
    let start_scale: f64 = (0..nb)
        .map(|b| fit.reference[b] / quad_form(&ones, fit.windows[b], &fit.grams[b]))
        .sum::<f64>()
        / nb as f64;
    let mut w = vec![math::sqrt(start_scale); nb];
    let mut r = fit.residuals(&w);
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    for _ in 0..200 {
        let c = cost(&r);
        if c < 1e-26 {
            break;
        }
        let jac = fit.jacobian(&w);
        let mut normal = vec![0.0; nb * nb];
        let mut rhs = vec![0.0; nb];
        for (row, &res) in jac.iter().zip(&r) {
            for i in 0..nb {
                if row[i] == 0.0 {
                    continue;
                }
                rhs[i] -= row[i] * res;
                for k in 0..nb {
                    normal[i * nb + k] += row[i] * row[k];
                }
            }
        }
        for i in 0..nb {
            normal[i * nb + i] *= 1.0 + 1e-12;
        }
        let Some(step) = solve_dense(normal, rhs, nb) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if trial.iter().all(|&x| x > 0.0) {
                let tr = fit.residuals(&trial);
                if cost(&tr) < c {
                    accepted = c - cost(&tr) > 1e-15 * c;
                    w = trial;
                    r = tr;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    w
}

/// Gaussian elimination with partial pivoting on a row-major `n×n` system.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erb_values() {
        assert!((erb(1000.0).unwrap() - 132.639).abs() < 1e-9);
        assert!((erb(1e-9).unwrap() - 24.7).abs() < 1e-6);
        assert!(erb(2000.0).unwrap() > erb(1000.0).unwrap());
        assert!(erb(0.0).is_err());
        assert!(erb(-5.0).is_err());
    }

    #[test]
    fn erb_number_round_trip() {
        for f in [20.0, 80.0, 1000.0, 16_000.0] {
            assert!((erb_number_to_hz(erb_number(f)) - f).abs() < 1e-9 * f);
        }
    }

    #[test]
    fn bandwidth_factor_matches_gamma_order_4() {
        // a_4 = π·6!·2^-6/(3!)^2
        let a4 = PI * 720.0 / 64.0 / 36.0;
        assert!((BANDWIDTH_FACTOR - 1.0 / a4).abs() < 1e-15);
        assert!((BANDWIDTH_FACTOR - 1.018_591).abs() < 1e-6);
    }

    #[test]
    fn spec_validation() {
        assert!(FilterbankSpec::new(48_000, 80.0, 24_000.0, 1.0).is_err());
        assert!(FilterbankSpec::new(48_000, 0.0, 1000.0, 1.0).is_err());
        assert!(FilterbankSpec::new(48_000, 2000.0, 1000.0, 1.0).is_err());
        assert!(FilterbankSpec::new(48_000, 80.0, 16_000.0, 0.5).is_err());
        let one = FilterbankSpec::new(48_000, 1000.0, 1000.0, 1.0).unwrap();
        assert_eq!(one.center_freqs(), &[1000.0]);
    }

    #[test]
    fn from_bands_checks_invariants() {
        let s = FilterbankSpec::default_for(48_000).unwrap();
        let ok = FilterbankSpec::from_bands(
            48_000,
            s.f_low(),
            s.f_high(),
            1.0,
            s.center_freqs().to_vec(),
            s.bandwidths().to_vec(),
        )
        .unwrap();
        assert_eq!(ok, s);
        let mut bw = s.bandwidths().to_vec();
        bw[3] *= 1.01;
        assert!(FilterbankSpec::from_bands(48_000, 80.0, 16_000.0, 1.0, s.center_freqs().to_vec(), bw)
            .is_err());
        let mut cf = s.center_freqs().to_vec();
        cf.swap(1, 2);
        let bw: Vec<f64> = cf.iter().map(|&f| erb_unchecked(f)).collect();
        assert!(FilterbankSpec::from_bands(48_000, 80.0, 16_000.0, 1.0, cf, bw).is_err());
    }

    #[test]
    fn dense_solver() {
        let a = vec![2.0, 1.0, 1.0, 3.0];
        let x = solve_dense(a, vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_none());
    }

    #[test]
    fn synthesize_rejects_mismatched_bands() {
        let fb = Filterbank::new(FilterbankSpec::new(16_000, 500.0, 2000.0, 1.0).unwrap());
        let mut bands = fb.analyze(&[1.0, 0.0, 0.0]);
        bands.bands.pop();
        assert!(fb.synthesize(&bands).is_err());
        let mut bands = fb.analyze(&[1.0, 0.0, 0.0]);
        bands.bands[0].push(Complex64::new(0.0, 0.0));
        assert!(fb.synthesize(&bands).is_err());
    }
}
