//! Design and simulation runs, with the two sides solved on their own
//! threads.

use std::thread;

use roomfill_core::render::{assemble_design, design_channel};
use roomfill_core::verify::simulate_with;
use roomfill_core::{
    EqualisationDesign, Filterbank, Renderer, RirSet, Side, SolverConfig, TargetFunction, VerificationReport,
};
use roomfill_core::{BandGainSet, RenderSettings};

use crate::config::Config;
use crate::error::{AppError, AppResult};

pub struct DesignRun {
    pub design: EqualisationDesign,
    /// Left then right.
    pub sets: [BandGainSet; 2],
}

/// Solves both sides concurrently. The sides are independent, so the
/// result does not depend on scheduling.
pub fn design(
    filterbank: &Filterbank,
    rirs: &RirSet,
    target: &TargetFunction,
    solver: &SolverConfig,
    settings: &RenderSettings,
) -> AppResult<DesignRun> {
    let solve = |side| design_channel(filterbank, rirs, side, target, solver, settings);
    let (left, right) = thread::scope(|s| {
        let left = s.spawn(|| solve(Side::Left));
        let right = solve(Side::Right);
        (left.join().expect("left solve panicked"), right)
    });
    let (left, right) = match (left, right) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(roomfill_core::Error::Unfillable(l)), Err(roomfill_core::Error::Unfillable(r))) => {
            return Err(unfillable_both(&l, &r));
        }
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    let design = assemble_design(filterbank, rirs, target, solver, settings, left.0, right.0)?;
    Ok(DesignRun {
        design,
        sets: [left.1, right.1],
    })
}

fn unfillable_both(left: &[usize], right: &[usize]) -> AppError {
    let mut bands: Vec<usize> = left.iter().chain(right).copied().collect();
    bands.sort_unstable();
    bands.dedup();
    roomfill_core::Error::Unfillable(bands).into()
}

/// Loads the responses named by `config` and solves.
pub fn design_from_config(config: &Config) -> AppResult<(DesignRun, RirSet)> {
    let rirs = config.load_rirs()?;
    let filterbank = Filterbank::new(config.spec(rirs.sample_rate())?);
    let run = design(
        &filterbank,
        &rirs,
        &config.target.target()?,
        &config.solver.config()?,
        &config.render.settings()?,
    )?;
    Ok((run, rirs))
}

/// Simulates the requested sides of a design through the config's
/// responses, reusing the design's balance gains.
pub fn simulate(
    design: &EqualisationDesign,
    config: &Config,
    sides: &[Side],
) -> AppResult<Vec<(Side, VerificationReport)>> {
    let raw = config.raw_rirs()?;
    let rate = raw[0].sample_rate();
    if rate != design.spec.sample_rate() {
        return Err(roomfill_core::Error::RateMismatch {
            expected: design.spec.sample_rate(),
            found: rate,
        }
        .into());
    }
    let rirs = RirSet::with_gains(raw, design.balance_gains)?;
    let filterbank = Filterbank::new(design.spec.clone());
    let renderer = Renderer::with_filterbank(design, &filterbank)?;
    let results: Vec<AppResult<VerificationReport>> = thread::scope(|s| {
        let handles: Vec<_> = sides
            .iter()
            .map(|&side| {
                let (renderer, filterbank, rirs) = (&renderer, &filterbank, &rirs);
                s.spawn(move || simulate_with(design, renderer, filterbank, rirs, side).map_err(AppError::from))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation panicked")).collect()
    });
    sides.iter().copied().zip(results).map(|(side, r)| r.map(|r| (side, r))).collect()
}
