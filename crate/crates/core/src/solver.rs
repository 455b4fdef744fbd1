//! Per-band fill gains for one supporting loudspeaker.
//!
//! Everything is bookkept in band energies. With primary energy `P_b`,
//! target `T_b` and deficit `D_b = max(0, T_b − P_b)`, the supporting channel
//! must contribute `D_b` in every band. The closed-form start
//! `g_b = sqrt(D_b / S_b)` ignores band overlap; the iteration then simulates
//! what the synthesised equaliser actually adds through the supporting path
//! (the coherent total minus the primary alone) and corrects each gain
//! multiplicatively with a damped exponent. Gains never go negative: the
//! method can only add energy.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::buffer::ImpulseResponse;
use crate::convolve::convolve_slices;
use crate::error::{check_rate, Error, Result};
use crate::gammatone::Filterbank;
use crate::fft;
use crate::math;
use crate::render::band_gain_eq;
use crate::target::TargetFunction;

/// A band whose support energy is below this fraction of the strongest
/// support band (-120 dB) cannot be filled.
pub const MIN_SUPPORT_ENERGY: f64 = 1e-12;

/// How the target's free level is fixed against the primary response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    /// Mean over bands of `primary_dB − shape_dB`.
    MeanFit,
    /// 95th percentile of the same differences; the target hugs the
    /// primary's upper envelope.
    Percentile95,
}

impl AnchorMode {
    pub fn name(self) -> &'static str {
        match self {
            AnchorMode::MeanFit => "mean-fit",
            AnchorMode::Percentile95 => "percentile-95",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "mean-fit" => Some(AnchorMode::MeanFit),
            "percentile-95" => Some(AnchorMode::Percentile95),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance_db: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub anchor_mode: AnchorMode,
    /// Upper bound on any band gain (10 = +20 dB).
    pub gain_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance_db: 0.5,
            max_iterations: 50,
            damping: 0.7,
            anchor_mode: AnchorMode::Percentile95,
            gain_cap: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_db > 0.0) || !self.tolerance_db.is_finite() {
            return Err(Error::invalid("tolerance_db", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", "must lie in (0, 1]"));
        }
        if !(self.gain_cap > 0.0) || !self.gain_cap.is_finite() {
            return Err(Error::invalid("gain_cap", "must be positive"));
        }
        Ok(())
    }
}

/// One accepted iterate: the worst residual over the bands being filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub max_residual_db: f64,
}

/// Solved gains for one supporting channel, with the energy bookkeeping that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BandGainSet {
    /// Linear amplitude per band, `>= 0`.
    pub gains: Vec<f64>,
    pub offset_db: f64,
    pub targets: Vec<f64>,
    pub primary: Vec<f64>,
    /// Band energy of the supporting path alone for the returned gains.
    pub fill: Vec<f64>,
    /// Band energy of the coherent sum of both paths.
    pub total: Vec<f64>,
    /// `10·log10(total / target)` per band.
    pub residual_db: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Bands held at the gain cap.
    pub capped: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

impl BandGainSet {
    /// Worst `|residual|` over the bands that receive fill.
    pub fn max_filled_residual_db(&self) -> f64 {
        self.gains
            .iter()
            .zip(&self.residual_db)
            .filter(|(&g, _)| g > 0.0)
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max)
    }
}

/// Target offset in dB for the given anchoring mode.
pub fn anchor_target(primary: &[f64], shape: &[f64], mode: AnchorMode) -> Result<f64> {
    if primary.len() != shape.len() {
        return Err(Error::LengthMismatch {
            expected: primary.len(),
            found: shape.len(),
        });
    }
    if primary.is_empty() {
        return Err(Error::invalid("primary", "no bands"));
    }
    if primary.iter().chain(shape).any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid("primary", "band energies must be strictly positive"));
    }
    let mut diffs: Vec<f64> = primary
        .iter()
        .zip(shape)
        .map(|(&p, &s)| math::db10(p) - math::db10(s))
        .collect();
    Ok(match mode {
        AnchorMode::MeanFit => diffs.iter().sum::<f64>() / diffs.len() as f64,
        AnchorMode::Percentile95 => {
            diffs.sort_by(f64::total_cmp);
            percentile(&diffs, 0.95)
        }
    })
}

/// Linear interpolation between closest ranks on sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let lo = math::floor(rank) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Closed-form gains ignoring band overlap: `sqrt(max(0, T − P) / S)`.
pub fn initial_gains(primary: &[f64], support: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    let n = targets.len();
    for len in [primary.len(), support.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, found: len });
        }
    }
    let floor = MIN_SUPPORT_ENERGY * support.iter().copied().fold(0.0, f64::max);
    let unfillable: Vec<usize> = (0..n)
        .filter(|&b| targets[b] > primary[b] && !(support[b] > floor))
        .collect();
    if !unfillable.is_empty() {
        return Err(Error::Unfillable(unfillable));
    }
    Ok((0..n)
        .map(|b| {
            let deficit = (targets[b] - primary[b]).max(0.0);
            if deficit > 0.0 {
                math::sqrt(deficit / support[b])
            } else {
                0.0
            }
        })
        .collect())
}

/// A contiguous run of bins `start..start + values.len()`.
#[derive(Debug, Clone)]
struct Run<T> {
    start: usize,
    values: Vec<T>,
}

fn significant_run<T: Copy>(values: &[T], magnitude: impl Fn(T) -> f64, rel: f64) -> Run<T> {
    let peak = values.iter().map(|&v| magnitude(v)).fold(0.0, f64::max);
    let keep = |v: &T| magnitude(*v) > rel * peak;
    let Some(first) = values.iter().position(keep) else {
        return Run { start: 0, values: Vec::new() };
    };
    let last = values.iter().rposition(keep).unwrap_or(first);
    Run {
        start: first,
        values: values[first..=last].to_vec(),
    }
}

/// Band energies of `primary + eq(g) ⊛ support` as a function of the band
/// gains `g`.
///
/// By Parseval, the energy of band `c` is `(1/N) Σ_k |H_c(k)|² |Y(k)|²`, and
/// the equaliser spectrum is linear in the gains, so every evaluation is a
/// sum over precomputed per-band spectra. `N` covers the longest signal plus
/// the analysis ringing, which makes this equal to
/// [`Filterbank::band_energies`] of the time-domain signals.
#[derive(Debug, Clone)]
pub struct FillModel {
    /// Primary spectrum on bins `0..=N/2`.
    primary: Vec<Complex64>,
    /// Support spectrum times each band's equaliser contribution.
    basis: Vec<Run<Complex64>>,
    /// `|H_c|²/N` folded onto the non-negative bins.
    weights: Vec<Run<f64>>,
    primary_energy: Vec<f64>,
    support_energy: Vec<f64>,
}

impl FillModel {
    /// `primary = None` models the supporting path alone.
    pub fn new(filterbank: &Filterbank, primary: Option<&[f64]>, support: &[f64]) -> Self {
        let primary_len = primary.map_or(0, <[f64]>::len);
        let span = primary_len.max(support.len() + filterbank.eq_len() - 1) + filterbank.tail_len() + 1;
        let n = span.next_power_of_two();
        let half = n / 2;
        let omega = |k: usize| 2.0 * PI * k as f64 / n as f64;

        let spectrum = |x: &[f64]| {
            let mut s = fft::forward_real(x, n);
            s.truncate(half + 1);
            s
        };
        let primary_spec = primary.map_or_else(|| vec![Complex64::new(0.0, 0.0); half + 1], spectrum);
        let support_spec = spectrum(support);

        let nb = filterbank.num_bands();
        let weights: Vec<Run<f64>> = (0..nb)
            .map(|c| {
                let folded: Vec<f64> = (0..=half)
                    .map(|k| {
                        let w = omega(k);
                        let mut p = filterbank.band_response(c, w).norm_sqr();
                        if k != 0 && k != half {
                            p += filterbank.band_response(c, -w).norm_sqr();
                        }
                        p / n as f64
                    })
                    .collect();
                significant_run(&folded, |v| v, WEIGHT_FLOOR)
            })
            .collect();
        let basis: Vec<Run<Complex64>> = (0..nb)
            .map(|b| {
                let eq: Vec<Complex64> = (0..=half).map(|k| filterbank.eq_band_response(b, omega(k))).collect();
                let mut run = significant_run(&eq, |v| v.norm(), BASIS_FLOOR);
                for (i, v) in run.values.iter_mut().enumerate() {
                    *v *= support_spec[run.start + i];
                }
                run
            })
            .collect();

        let mut model = Self {
            primary: primary_spec,
            basis,
            weights,
            primary_energy: Vec::new(),
            support_energy: Vec::new(),
        };
        model.primary_energy = model.energies(&model.primary);
        model.support_energy = model.energies(&support_spec);
        model
    }

    pub fn num_bands(&self) -> usize {
        self.weights.len()
    }

    /// Band energies of the primary path alone.
    pub fn primary_energies(&self) -> &[f64] {
        &self.primary_energy
    }

    /// Band energies of the unequalised supporting path.
    pub fn support_energies(&self) -> &[f64] {
        &self.support_energy
    }

    fn energies(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|run| {
                run.values
                    .iter()
                    .zip(&spectrum[run.start..])
                    .map(|(w, y)| w * y.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Returns `(total, fill)` band energies for `gains`: the coherent sum of
    /// both paths and the supporting path alone.
    pub fn evaluate(&self, gains: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if gains.len() != self.num_bands() {
            return Err(Error::LengthMismatch {
                expected: self.num_bands(),
                found: gains.len(),
            });
        }
        let mut fill = vec![Complex64::new(0.0, 0.0); self.primary.len()];
        for (run, &g) in self.basis.iter().zip(gains) {
            if g == 0.0 {
                continue;
            }
            for (y, v) in fill[run.start..].iter_mut().zip(&run.values) {
                *y += v * g;
            }
        }
        let fill_energy = self.energies(&fill);
        for (y, p) in fill.iter_mut().zip(&self.primary) {
            *y += p;
        }
        Ok((self.energies(&fill), fill_energy))
    }
}

// Relative power below which an analysis band's response is dropped.
const WEIGHT_FLOOR: f64 = 1e-14;
// Relative magnitude below which an equaliser band's response is dropped.
const BASIS_FLOOR: f64 = 1e-9;

/// Anchors `target` against the primary response and solves the fill gains.
///
/// `support_ir` is the whole supporting path as heard at the listening
/// position, i.e. everything the equaliser output passes through.
pub fn solve_gains(
    filterbank: &Filterbank,
    primary_ir: &ImpulseResponse,
    support_ir: &ImpulseResponse,
    target: &TargetFunction,
    config: &SolverConfig,
) -> Result<BandGainSet> {
    check_rate(primary_ir.sample_rate(), support_ir.sample_rate())?;
    let model = FillModel::new(filterbank, Some(primary_ir.samples()), support_ir.samples());
    let (offset_db, targets) = anchored_targets(filterbank, model.primary_energies(), target, config)?;
    solve_model(&model, targets, offset_db, config)
}

/// Target band energies anchored against `primary`, with the offset used.
pub fn anchored_targets(
    filterbank: &Filterbank,
    primary: &[f64],
    target: &TargetFunction,
    config: &SolverConfig,
) -> Result<(f64, Vec<f64>)> {
    target.validate()?;
    let shape = target
        .with_offset(0.0)
        .band_targets(filterbank.spec().center_freqs(), filterbank.reference_energies())?;
    let offset_db = anchor_target(primary, &shape, config.anchor_mode)?;
    let scale = math::undb10(offset_db);
    Ok((offset_db, shape.iter().map(|s| s * scale).collect()))
}

/// Solves fill gains against explicit per-band target energies.
pub fn solve_to_targets(
    filterbank: &Filterbank,
    primary_ir: &ImpulseResponse,
    support_ir: &ImpulseResponse,
    targets: Vec<f64>,
    offset_db: f64,
    config: &SolverConfig,
) -> Result<BandGainSet> {
    check_rate(primary_ir.sample_rate(), support_ir.sample_rate())?;
    let model = FillModel::new(filterbank, Some(primary_ir.samples()), support_ir.samples());
    solve_model(&model, targets, offset_db, config)
}

/// The damped multiplicative iteration on a prepared model.
pub fn solve_model(model: &FillModel, targets: Vec<f64>, offset_db: f64, config: &SolverConfig) -> Result<BandGainSet> {
    config.validate()?;
    let nb = model.num_bands();
    if targets.len() != nb {
        return Err(Error::LengthMismatch {
            expected: nb,
            found: targets.len(),
        });
    }
    if targets.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid("targets", "band targets must be positive"));
    }
    let primary = model.primary_energies().to_vec();
    let deficit: Vec<f64> = (0..nb).map(|b| (targets[b] - primary[b]).max(0.0)).collect();

    let mut gains = initial_gains(&primary, model.support_energies(), &targets)?;
    let cap = |g: &mut Vec<f64>| {
        for x in g.iter_mut() {
            *x = x.min(config.gain_cap);
        }
    };
    cap(&mut gains);

    let residuals = |total: &[f64]| -> Vec<f64> { (0..nb).map(|b| math::db10(total[b] / targets[b])).collect() };
    // Bands still being driven: a deficit, a non-zero gain, and not pinned at
    // the cap while short of target.
    let worst = |g: &[f64], res: &[f64]| -> f64 {
        (0..nb)
            .filter(|&b| deficit[b] > 0.0 && g[b] > 0.0)
            .filter(|&b| !(g[b] >= config.gain_cap && res[b] < 0.0))
            .map(|b| res[b].abs())
            .fold(0.0, f64::max)
    };

    let (mut total, mut fill) = model.evaluate(&gains)?;
    let mut residual_db = residuals(&total);
    let mut err = worst(&gains, &residual_db);
    let mut trace = vec![TraceRow {
        iteration: 0,
        max_residual_db: err,
    }];
    let mut iterations = 0;
    let mut converged = err <= config.tolerance_db;

    while !converged && iterations < config.max_iterations {
        // What the supporting path adds on top of the primary, against what
        // it should add.
        let ratio: Vec<f64> = (0..nb)
            .map(|b| {
                if deficit[b] > 0.0 && gains[b] > 0.0 {
                    let achieved = (total[b] - primary[b]).max(deficit[b] * MIN_ACHIEVED);
                    deficit[b] / achieved
                } else {
                    1.0
                }
            })
            .collect();

        // Backtrack on the exponent until the worst residual does not grow.
        let mut step = config.damping / 2.0;
        let mut accepted = None;
        for _ in 0..BACKTRACK_STEPS {
            let mut trial: Vec<f64> = gains
                .iter()
                .zip(&ratio)
                .map(|(&g, &r)| if g > 0.0 { g * math::powf(r, step) } else { 0.0 })
                .collect();
            cap(&mut trial);
            let (trial_total, trial_fill) = model.evaluate(&trial)?;
            let trial_res = residuals(&trial_total);
            let trial_err = worst(&trial, &trial_res);
            if trial_err <= err {
                accepted = Some((trial, trial_total, trial_fill, trial_res, trial_err));
                break;
            }
            step /= 2.0;
        }
        let Some((g, t, f, r, e)) = accepted else {
            break;
        };
        gains = g;
        total = t;
        fill = f;
        residual_db = r;
        err = e;
        iterations += 1;
        trace.push(TraceRow {
            iteration: iterations,
            max_residual_db: err,
        });
        converged = err <= config.tolerance_db;
    }

    let capped = (0..nb).filter(|&b| gains[b] >= config.gain_cap).collect();
    Ok(BandGainSet {
        gains,
        offset_db,
        targets,
        primary,
        fill,
        total,
        residual_db,
        iterations_used: iterations,
        converged,
        capped,
        trace,
    })
}

// Floor on the achieved fill as a fraction of the deficit, so a band the
// coherent sum has cancelled still gets a finite push.
const MIN_ACHIEVED: f64 = 1e-3;
const BACKTRACK_STEPS: usize = 8;

/// Front-path equaliser gains: the same solve with the primary response as
/// the only path, so the equalised front alone must reach the target in every
/// band (gains may fall below 1). The target is anchored exactly as for the
/// fill solve.
pub fn solve_front_gains(
    filterbank: &Filterbank,
    primary_ir: &ImpulseResponse,
    target: &TargetFunction,
    config: &SolverConfig,
) -> Result<BandGainSet> {
    let model = FillModel::new(filterbank, None, primary_ir.samples());
    let primary = filterbank.ir_band_energies(primary_ir)?;
    let (offset_db, targets) = anchored_targets(filterbank, &primary, target, config)?;
    solve_model(&model, targets, offset_db, config)
}

/// Brute-force reference for one band: the gain on an equaliser passing only
/// `band` such that the band energy of `primary + g·EQ_b ⊛ support` hits
/// `target_energy`. Works in the time domain, independently of
/// [`FillModel`] and the update rule: a coarse scan over `[0, gain_max]`
/// followed by golden-section refinement to 1e-4.
pub fn oracle_single_band(
    filterbank: &Filterbank,
    primary_ir: &ImpulseResponse,
    support_ir: &ImpulseResponse,
    target_energy: f64,
    band: usize,
    gain_max: f64,
) -> Result<f64> {
    check_rate(primary_ir.sample_rate(), support_ir.sample_rate())?;
    if band >= filterbank.num_bands() {
        return Err(Error::invalid("band", "index out of range"));
    }
    let mut only = vec![0.0; filterbank.num_bands()];
    only[band] = 1.0;
    let eq = band_gain_eq(filterbank, &only)?;
    let unit_fill = convolve_slices(&eq, support_ir.samples());
    let p = primary_ir.samples();

    let len = p.len().max(unit_fill.len());
    let mut mixed = vec![0.0; len];
    let mut misfit = |g: f64| {
        for (n, m) in mixed.iter_mut().enumerate() {
            *m = p.get(n).copied().unwrap_or(0.0) + g * unit_fill.get(n).copied().unwrap_or(0.0);
        }
        (filterbank.band_energy(&mixed, band) - target_energy).abs()
    };

    // The band energy is a convex quadratic in g, so |E(g) − T| has at most
    // two local minima; the scan picks the right basin.
    const SCAN: usize = 64;
    let step = gain_max / SCAN as f64;
    let best = (0..=SCAN)
        .map(|i| (i, misfit(i as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i);
    let mut a = (best as f64 - 1.0).max(0.0) * step;
    let mut b = ((best + 1) as f64 * step).min(gain_max);

    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (misfit(c), misfit(d));
    while b - a > 1e-4 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = misfit(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = misfit(d);
        }
    }
    let g = (a + b) / 2.0;
    Ok(if misfit(0.0) <= misfit(g) { 0.0 } else { g })
}
