//! Supporting-channel processing and rendering of the four playback
//! conditions.
//!
//! In the proposed condition the primary (front) channels carry the input
//! untouched. Each supporting channel gets the band-gain equaliser, the
//! all-pass decorrelator, a bulk delay inside the precedence window and its
//! balance gain, in that order.

use alloc::vec;
use alloc::vec::Vec;

use crate::buffer::{delay_samples, AudioBuffer, ImpulseResponse};
use crate::convolve::convolve_slices;
use crate::decorrelator::{self, design_decorrelator, DecorrelatorFilter};
use crate::error::{check_rate, Error, Result};
use crate::gammatone::{Filterbank, FilterbankSpec};
use crate::rir::{Channel, RirSet, Side};
use crate::solver::{self, BandGainSet, SolverConfig};
use crate::target::TargetFunction;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DELAY_MS: f64 = 10.0;
/// Precedence-effect window the supporting delay must stay inside.
pub const MIN_DELAY_MS: f64 = 2.0;
pub const MAX_DELAY_MS: f64 = 50.0;

/// Equaliser impulse response: a unit impulse analysed, weighted per band and
/// resynthesised. All-unity gains give a delayed impulse to within the
/// reconstruction ripple; the latency is [`Filterbank::latency`].
pub fn band_gain_eq(filterbank: &Filterbank, gains: &[f64]) -> Result<Vec<f64>> {
    let len = filterbank.eq_len();
    let mut bands = filterbank.analyze_padded(&[1.0], len);
    bands.apply_gains(gains)?;
    filterbank.synthesize(&bands)
}

/// Processing parameters for the supporting chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub delay_ms: f64,
    pub decorrelator_len: usize,
    pub seed_left: u64,
    pub seed_right: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            delay_ms: DEFAULT_DELAY_MS,
            decorrelator_len: decorrelator::DEFAULT_LENGTH,
            seed_left: decorrelator::DEFAULT_SEED_LEFT,
            seed_right: decorrelator::DEFAULT_SEED_RIGHT,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_ms >= MIN_DELAY_MS && self.delay_ms <= MAX_DELAY_MS) {
            return Err(Error::invalid(
                "delay_ms",
                alloc::format!(
                    "{} ms lies outside the precedence window [{MIN_DELAY_MS}, {MAX_DELAY_MS}] ms",
                    self.delay_ms
                ),
            ));
        }
        if !self.decorrelator_len.is_power_of_two() || self.decorrelator_len < 256 {
            return Err(Error::invalid("decorrelator_len", "must be a power of two >= 256"));
        }
        if self.seed_left == self.seed_right {
            return Err(Error::invalid("seed_right", "left and right decorrelator seeds must differ"));
        }
        Ok(())
    }
}

/// Solved result for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDesign {
    /// Fill gains for the supporting loudspeaker.
    pub gains: Vec<f64>,
    /// Equaliser gains for the primary loudspeaker in the front-EQ condition.
    pub front_gains: Vec<f64>,
    pub offset_db: f64,
    pub residual_db: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Everything the renderer needs, as stored in a design file.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualisationDesign {
    pub format_version: u32,
    pub spec: FilterbankSpec,
    /// Slope and reference frequencies; the per-side offset lives in
    /// [`ChannelDesign::offset_db`].
    pub target: TargetFunction,
    pub solver: SolverConfig,
    pub settings: RenderSettings,
    pub balance_gains: [f64; 4],
    pub left: ChannelDesign,
    pub right: ChannelDesign,
}

impl EqualisationDesign {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::invalid(
                "format_version",
                alloc::format!("unsupported version {}", self.format_version),
            ));
        }
        self.settings.validate()?;
        self.target.validate()?;
        self.solver.validate()?;
        if self.balance_gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid("balance_gains", "must all be positive"));
        }
        let nb = self.spec.num_bands();
        for side in [&self.left, &self.right] {
            for v in [&side.gains, &side.front_gains, &side.residual_db] {
                if v.len() != nb {
                    return Err(Error::LengthMismatch {
                        expected: nb,
                        found: v.len(),
                    });
                }
            }
            if side.gains.iter().chain(&side.front_gains).any(|g| !(*g >= 0.0) || !g.is_finite()) {
                return Err(Error::invalid("gains", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn channel(&self, side: Side) -> &ChannelDesign {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn channel_mut(&mut self, side: Side) -> &mut ChannelDesign {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// The side's target with its solved offset.
    pub fn target_for(&self, side: Side) -> TargetFunction {
        self.target.with_offset(self.channel(side).offset_db)
    }

    pub fn converged(&self) -> bool {
        self.left.converged && self.right.converged
    }
}

/// The supporting path as heard at the listening position for an equaliser
/// output: decorrelator, bulk delay, balance gain and room response.
pub fn support_path(rirs: &RirSet, side: Side, settings: &RenderSettings) -> Result<ImpulseResponse> {
    let seed = match side {
        Side::Left => settings.seed_left,
        Side::Right => settings.seed_right,
    };
    let decorrelator = design_decorrelator(settings.decorrelator_len, seed)?;
    let room = rirs.balanced(side.support());
    let chain = decorrelator.apply(room.samples());
    let delay = delay_samples(settings.delay_ms, rirs.sample_rate());
    let mut samples = vec![0.0; delay + chain.len()];
    samples[delay..].copy_from_slice(&chain);
    ImpulseResponse::new(rirs.sample_rate(), samples, side.support().name())
}

/// Solves one side: fill gains through the supporting path and, for the
/// front-EQ condition, equaliser gains for the primary.
pub fn design_channel(
    filterbank: &Filterbank,
    rirs: &RirSet,
    side: Side,
    target: &TargetFunction,
    config: &SolverConfig,
    settings: &RenderSettings,
) -> Result<(ChannelDesign, BandGainSet)> {
    check_rate(filterbank.spec().sample_rate(), rirs.sample_rate())?;
    settings.validate()?;
    let primary = rirs.balanced(side.primary());
    let support = support_path(rirs, side, settings)?;
    let fill = solver::solve_gains(filterbank, &primary, &support, target, config)?;
    let front = solver::solve_front_gains(filterbank, &primary, target, config)?;
    let design = ChannelDesign {
        gains: fill.gains.clone(),
        front_gains: front.gains,
        offset_db: fill.offset_db,
        residual_db: fill.residual_db.clone(),
        iterations_used: fill.iterations_used,
        converged: fill.converged,
    };
    Ok((design, fill))
}

/// Assembles a design from two solved sides.
pub fn assemble_design(
    filterbank: &Filterbank,
    rirs: &RirSet,
    target: &TargetFunction,
    solver: &SolverConfig,
    settings: &RenderSettings,
    left: ChannelDesign,
    right: ChannelDesign,
) -> Result<EqualisationDesign> {
    let design = EqualisationDesign {
        format_version: FORMAT_VERSION,
        spec: filterbank.spec().clone(),
        target: target.with_offset(0.0),
        solver: *solver,
        settings: *settings,
        balance_gains: rirs.balance_gains(),
        left,
        right,
    };
    design.validate()?;
    Ok(design)
}

/// Sequential convenience wrapper around [`design_channel`].
pub fn design_equalisation(
    filterbank: &Filterbank,
    rirs: &RirSet,
    target: &TargetFunction,
    solver: &SolverConfig,
    settings: &RenderSettings,
) -> Result<EqualisationDesign> {
    let (left, _) = design_channel(filterbank, rirs, Side::Left, target, solver, settings)?;
    let (right, _) = design_channel(filterbank, rirs, Side::Right, target, solver, settings)?;
    assemble_design(filterbank, rirs, target, solver, settings, left, right)
}

/// Playback conditions. Output channel order is always FL, FR, SL, SR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// Fronts untouched; supporting channels carry the fill chain.
    Proposed,
    /// Plain stereo on the fronts, silent rears.
    Stereo,
    /// The same unprocessed stereo on fronts and rears.
    RearStereo,
    /// Band equalisation on the fronts, silent rears.
    FrontEq,
}

impl RenderMode {
    pub const ALL: [RenderMode; 4] = [
        RenderMode::Proposed,
        RenderMode::Stereo,
        RenderMode::RearStereo,
        RenderMode::FrontEq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RenderMode::Proposed => "proposed",
            RenderMode::Stereo => "stereo",
            RenderMode::RearStereo => "rear_stereo",
            RenderMode::FrontEq => "front_eq",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Latencies in samples relative to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latency {
    /// Bulk supporting delay.
    pub support_delay: usize,
    /// Equaliser alignment latency.
    pub eq_alignment: usize,
    /// Lag of each decorrelator's largest tap.
    pub decorrelator_peak: [usize; 2],
    /// Lag of the largest sample of each side's supporting impulse response,
    /// i.e. where the supporting channel correlates most strongly with its
    /// front channel. Equals the sum of the three above only when the
    /// equaliser is close to a delayed impulse: a random-phase decorrelator
    /// has no dominant tap, so a shaped equaliser can move the peak.
    pub support_total: [usize; 2],
    /// Latency of the front channels (non-zero only in front-EQ mode).
    pub front: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub buffer: AudioBuffer,
    pub latency: Latency,
}

struct SideChain {
    eq: Vec<f64>,
    front_eq: Vec<f64>,
    decorrelator: DecorrelatorFilter,
    support_gain: f64,
    primary_gain: f64,
}

/// Precomputed filters for a design.
pub struct Renderer {
    sample_rate: u32,
    delay: usize,
    eq_latency: usize,
    sides: [SideChain; 2],
    support_peak: [usize; 2],
}

impl Renderer {
    pub fn new(design: &EqualisationDesign) -> Result<Self> {
        let filterbank = Filterbank::new(design.spec.clone());
        Self::with_filterbank(design, &filterbank)
    }

    /// Reuses an already built filterbank for `design.spec`.
    pub fn with_filterbank(design: &EqualisationDesign, filterbank: &Filterbank) -> Result<Self> {
        design.validate()?;
        if filterbank.spec() != &design.spec {
            return Err(Error::invalid("spec", "filterbank does not match the design"));
        }
        let settings = design.settings;
        let chain = |side: Side, seed: u64| -> Result<SideChain> {
            let ch = design.channel(side);
            Ok(SideChain {
                eq: band_gain_eq(filterbank, &ch.gains)?,
                front_eq: band_gain_eq(filterbank, &ch.front_gains)?,
                decorrelator: design_decorrelator(settings.decorrelator_len, seed)?,
                support_gain: design.balance_gains[side.support().index()],
                primary_gain: design.balance_gains[side.primary().index()],
            })
        };
        let mut renderer = Self {
            sample_rate: design.spec.sample_rate(),
            delay: delay_samples(settings.delay_ms, design.spec.sample_rate()),
            eq_latency: filterbank.latency(),
            sides: [chain(Side::Left, settings.seed_left)?, chain(Side::Right, settings.seed_right)?],
            support_peak: [0, 0],
        };
        for side in Side::BOTH {
            let chain = &renderer.sides[side.index()];
            let nominal = renderer.delay + renderer.eq_latency + chain.decorrelator.peak_lag();
            let response = renderer.support_signal(side, &[1.0]);
            let peak = response
                .iter()
                .enumerate()
                .fold((nominal, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
                .0;
            renderer.support_peak[side.index()] = peak;
        }
        Ok(renderer)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn latency(&self, mode: RenderMode) -> Latency {
        let peaks = [self.sides[0].decorrelator.peak_lag(), self.sides[1].decorrelator.peak_lag()];
        let (support_delay, eq_alignment, decorrelator_peak, support_total) = match mode {
            RenderMode::Proposed => (
                self.delay,
                self.eq_latency,
                peaks,
                self.support_peak,
            ),
            _ => (0, 0, [0, 0], [0, 0]),
        };
        Latency {
            support_delay,
            eq_alignment,
            decorrelator_peak,
            support_total,
            front: if mode == RenderMode::FrontEq { self.eq_latency } else { 0 },
        }
    }

    /// Supporting-channel signal for one side (proposed condition).
    pub fn support_signal(&self, side: Side, input: &[f64]) -> Vec<f64> {
        let chain = &self.sides[side.index()];
        let equalised = convolve_slices(input, &chain.eq);
        let decorrelated = chain.decorrelator.apply(&equalised);
        let mut out = vec![0.0; self.delay + decorrelated.len()];
        for (o, x) in out[self.delay..].iter_mut().zip(&decorrelated) {
            *o = x * chain.support_gain;
        }
        out
    }

    /// Front signal for one side in the front-EQ condition.
    pub fn front_eq_signal(&self, side: Side, input: &[f64]) -> Vec<f64> {
        let chain = &self.sides[side.index()];
        convolve_slices(input, &chain.front_eq)
            .into_iter()
            .map(|x| x * chain.primary_gain)
            .collect()
    }

    /// Renders stereo input to FL, FR, SL, SR.
    pub fn render(&self, input: &AudioBuffer, mode: RenderMode) -> Result<Rendered> {
        check_rate(self.sample_rate, input.sample_rate())?;
        if input.num_channels() != 2 {
            return Err(Error::invalid(
                "input",
                alloc::format!("expected stereo input, got {} channels", input.num_channels()),
            ));
        }
        let (l, r) = (input.channel(0), input.channel(1));
        let silent = || vec![0.0; l.len()];
        let channels = match mode {
            RenderMode::Stereo => vec![l.to_vec(), r.to_vec(), silent(), silent()],
            RenderMode::RearStereo => vec![l.to_vec(), r.to_vec(), l.to_vec(), r.to_vec()],
            RenderMode::Proposed => {
                let sl = self.support_signal(Side::Left, l);
                let sr = self.support_signal(Side::Right, r);
                pad_all(vec![l.to_vec(), r.to_vec(), sl, sr])
            }
            RenderMode::FrontEq => {
                let fl = self.front_eq_signal(Side::Left, l);
                let fr = self.front_eq_signal(Side::Right, r);
                pad_all(vec![fl, fr, silent(), silent()])
            }
        };
        Ok(Rendered {
            buffer: AudioBuffer::new(self.sample_rate, channels)?,
            latency: self.latency(mode),
        })
    }

    /// Impulse response of one side's supporting chain, as a labelled IR.
    pub fn support_impulse(&self, side: Side) -> Result<ImpulseResponse> {
        ImpulseResponse::new(
            self.sample_rate,
            self.support_signal(side, &[1.0]),
            Channel::name(side.support()),
        )
    }
}

fn pad_all(mut channels: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let len = channels.iter().map(Vec::len).max().unwrap_or(0);
    for c in channels.iter_mut() {
        c.resize(len, 0.0);
    }
    channels
}
