//! Desk-scale check of a design: the playback chain is run through the room
//! impulse responses and the resulting band energies are tabulated against
//! the target.

use alloc::vec::Vec;

use crate::convolve::convolve_slices;
use crate::error::{check_rate, Error, Result};
use crate::gammatone::Filterbank;
use crate::math;
use crate::render::{EqualisationDesign, Renderer};
use crate::rir::{RirSet, Side};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub f_c: f64,
    pub primary_db: f64,
    pub fill_db: f64,
    pub total_db: f64,
    pub target_db: f64,
    pub deviation_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub bands: usize,
    /// Bands whose supporting gain is non-zero.
    pub filled: usize,
    pub max_abs_deviation_filled_bands: f64,
    /// RMS deviation over the filled bands.
    pub rms_deviation: f64,
    /// Bands short of target that received no fill.
    pub unfilled_band_count: usize,
}

impl Summary {
    /// Passes when every filled band lies within `tolerance_db` and no band
    /// with a deficit was left empty.
    pub fn passes(&self, tolerance_db: f64) -> bool {
        self.max_abs_deviation_filled_bands <= tolerance_db && self.unfilled_band_count == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub rows: Vec<BandRow>,
    pub summary: Summary,
}

impl VerificationReport {
    /// Builds a report from rows and the per-band fill gains.
    pub fn from_rows(rows: Vec<BandRow>, gains: &[f64]) -> Result<Self> {
        if gains.len() != rows.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                found: gains.len(),
            });
        }
        let filled: Vec<&BandRow> = rows.iter().zip(gains).filter(|(_, &g)| g > 0.0).map(|(r, _)| r).collect();
        let unfilled_band_count = rows
            .iter()
            .zip(gains)
            .filter(|(r, &g)| g == 0.0 && r.target_db > r.primary_db)
            .count();
        let max_abs = filled.iter().map(|r| r.deviation_db.abs()).fold(0.0, f64::max);
        let rms = if filled.is_empty() {
            0.0
        } else {
            math::sqrt(filled.iter().map(|r| r.deviation_db * r.deviation_db).sum::<f64>() / filled.len() as f64)
        };
        let summary = Summary {
            bands: rows.len(),
            filled: filled.len(),
            max_abs_deviation_filled_bands: max_abs,
            rms_deviation: rms,
            unfilled_band_count,
        };
        Ok(Self { rows, summary })
    }
}

/// Band energies of the two acoustic paths for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnergies {
    pub primary: Vec<f64>,
    pub fill: Vec<f64>,
    /// Coherent sum of both paths at the listening position.
    pub total: Vec<f64>,
}

/// Runs an impulse through one side's proposed-mode chain and the room.
///
/// The front channel carries the input unchanged, so its path is the
/// balanced primary response. The supporting channel's signal already
/// includes its balance gain and goes through the measured response.
pub fn simulate_paths(
    renderer: &Renderer,
    filterbank: &Filterbank,
    rirs: &RirSet,
    side: Side,
) -> Result<PathEnergies> {
    check_rate(renderer.sample_rate(), rirs.sample_rate())?;
    check_rate(filterbank.spec().sample_rate(), rirs.sample_rate())?;
    let primary_path = rirs.balanced(side.primary()).samples().to_vec();
    let support_signal = renderer.support_signal(side, &[1.0]);
    let fill_path = convolve_slices(&support_signal, rirs.raw(side.support()).samples());

    // All three are measured over the same span, so a silent fill leaves
    // the total bit-identical to the primary.
    let len = primary_path.len().max(fill_path.len());
    let (mut primary_path, mut fill_path) = (primary_path, fill_path);
    primary_path.resize(len, 0.0);
    fill_path.resize(len, 0.0);
    let total: Vec<f64> = primary_path.iter().zip(&fill_path).map(|(p, f)| p + f).collect();
    Ok(PathEnergies {
        primary: filterbank.band_energies(&primary_path),
        fill: filterbank.band_energies(&fill_path),
        total: filterbank.band_energies(&total),
    })
}

/// Simulates one side with an existing renderer and filterbank.
pub fn simulate_with(
    design: &EqualisationDesign,
    renderer: &Renderer,
    filterbank: &Filterbank,
    rirs: &RirSet,
    side: Side,
) -> Result<VerificationReport> {
    let paths = simulate_paths(renderer, filterbank, rirs, side)?;
    let targets = design
        .target_for(side)
        .band_targets(filterbank.spec().center_freqs(), filterbank.reference_energies())?;
    let rows = filterbank
        .spec()
        .center_freqs()
        .iter()
        .enumerate()
        .map(|(b, &f_c)| {
            let total_db = math::db10(paths.total[b]);
            let target_db = math::db10(targets[b]);
            BandRow {
                f_c,
                primary_db: math::db10(paths.primary[b]),
                fill_db: math::db10(paths.fill[b]),
                total_db,
                target_db,
                deviation_db: total_db - target_db,
            }
        })
        .collect();
    VerificationReport::from_rows(rows, &design.channel(side).gains)
}

/// Simulates one side of a design through `rirs`.
pub fn simulate_total(design: &EqualisationDesign, rirs: &RirSet, side: Side) -> Result<VerificationReport> {
    check_rate(design.spec.sample_rate(), rirs.sample_rate())?;
    let filterbank = Filterbank::new(design.spec.clone());
    let renderer = Renderer::with_filterbank(design, &filterbank)?;
    simulate_with(design, &renderer, &filterbank, rirs, side)
}
