//! TOML configuration. Every section and key is optional except `[io]`;
//! missing keys take the library defaults, unknown keys are errors.
//!
//! ```toml
//! [io]
//! # primary_left, primary_right, support_left, support_right, or eight
//! # files: two microphone positions per loudspeaker, in the same order.
//! rirs = ["pl.wav", "pr.wav", "sl.wav", "sr.wav"]
//! output_dir = "out"
//!
//! [filterbank]
//! f_low = 80.0
//! f_high = 16000.0
//! bands_per_erb = 1.0
//! ```
//!
//! Instead of `io.rirs`, a `[fixtures]` section can synthesise the four
//! responses in memory (see [`FixtureSection`]).

use std::path::{Path, PathBuf};

use roomfill_core::fixtures::{synth_rir, Coloration, SyntheticRirParams};
use roomfill_core::{
    average_pair, balance_levels, AnchorMode, FilterbankSpec, ImpulseResponse, RenderSettings, RirSet,
    SolverConfig, TargetFunction,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::wav;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub io: IoSection,
    #[serde(default)]
    pub filterbank: FilterbankSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<FixtureSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default)]
    pub rirs: Vec<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            rirs: Vec::new(),
            output_dir: default_output_dir(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterbankSection {
    pub f_low: f64,
    pub f_high: f64,
    pub bands_per_erb: f64,
}

impl Default for FilterbankSection {
    fn default() -> Self {
        let spec = FilterbankSpec::default_for(48_000).expect("default spec");
        Self {
            f_low: spec.f_low(),
            f_high: spec.f_high(),
            bands_per_erb: spec.bands_per_erb(),
        }
    }
}

impl FilterbankSection {
    pub fn spec(&self, sample_rate: u32) -> AppResult<FilterbankSpec> {
        Ok(FilterbankSpec::new(sample_rate, self.f_low, self.f_high, self.bands_per_erb)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub slope_db: f64,
    pub f_ref_low: f64,
    pub f_ref_high: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        let t = TargetFunction::default();
        Self {
            slope_db: t.slope_db,
            f_ref_low: t.f_ref_low,
            f_ref_high: t.f_ref_high,
        }
    }
}

impl TargetSection {
    pub fn target(&self) -> AppResult<TargetFunction> {
        let t = TargetFunction {
            slope_db: self.slope_db,
            f_ref_low: self.f_ref_low,
            f_ref_high: self.f_ref_high,
            offset_db: 0.0,
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance_db: f64,
    pub max_iterations: usize,
    pub damping: f64,
    /// `percentile-95` or `mean-fit`.
    pub anchor_mode: String,
    pub gain_cap: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            tolerance_db: c.tolerance_db,
            max_iterations: c.max_iterations,
            damping: c.damping,
            anchor_mode: c.anchor_mode.name().to_string(),
            gain_cap: c.gain_cap,
        }
    }
}

impl SolverSection {
    pub fn config(&self) -> AppResult<SolverConfig> {
        let anchor_mode = AnchorMode::from_name(&self.anchor_mode).ok_or_else(|| {
            AppError::Usage(format!(
                "invalid `solver.anchor_mode`: {:?} (expected \"percentile-95\" or \"mean-fit\")",
                self.anchor_mode
            ))
        })?;
        let c = SolverConfig {
            tolerance_db: self.tolerance_db,
            max_iterations: self.max_iterations,
            damping: self.damping,
            anchor_mode,
            gain_cap: self.gain_cap,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub delay_ms: f64,
    pub decorrelator_len: usize,
    pub seed_left: u64,
    pub seed_right: u64,
}

impl Default for RenderSection {
    fn default() -> Self {
        let s = RenderSettings::default();
        Self {
            delay_ms: s.delay_ms,
            decorrelator_len: s.decorrelator_len,
            seed_left: s.seed_left,
            seed_right: s.seed_right,
        }
    }
}

impl RenderSection {
    pub fn settings(&self) -> AppResult<RenderSettings> {
        let s = RenderSettings {
            delay_ms: self.delay_ms,
            decorrelator_len: self.decorrelator_len,
            seed_left: self.seed_left,
            seed_right: self.seed_right,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Four synthetic responses in channel order, generated instead of read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSection {
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    pub primary_left: FixtureParams,
    pub primary_right: FixtureParams,
    pub support_left: FixtureParams,
    pub support_right: FixtureParams,
}

fn default_rate() -> u32 {
    48_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureParams {
    pub length_ms: f64,
    pub direct_amplitude: f64,
    pub direct_delay_ms: f64,
    pub t60_ms: f64,
    /// `[f0_hz, depth_db, q]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notch: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowpass_hz: Option<f64>,
    pub seed: u64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self::from_params(&SyntheticRirParams::default())
    }
}

impl FixtureParams {
    pub fn from_params(p: &SyntheticRirParams) -> Self {
        let (notch, lowpass_hz) = match p.coloration {
            Coloration::None => (None, None),
            Coloration::Notch { f0, depth_db, q } => (Some([f0, depth_db, q]), None),
            Coloration::Lowpass { fc } => (None, Some(fc)),
        };
        Self {
            length_ms: p.length_ms,
            direct_amplitude: p.direct_amplitude,
            direct_delay_ms: p.direct_delay_ms,
            t60_ms: p.t60_ms,
            notch,
            lowpass_hz,
            seed: p.seed,
        }
    }

    pub fn params(&self, sample_rate: u32) -> AppResult<SyntheticRirParams> {
        let coloration = match (self.notch, self.lowpass_hz) {
            (None, None) => Coloration::None,
            (Some([f0, depth_db, q]), None) => Coloration::Notch { f0, depth_db, q },
            (None, Some(fc)) => Coloration::Lowpass { fc },
            (Some(_), Some(_)) => {
                return Err(AppError::Usage("a fixture takes either `notch` or `lowpass_hz`, not both".into()))
            }
        };
        let p = SyntheticRirParams {
            sample_rate,
            length_ms: self.length_ms,
            direct_amplitude: self.direct_amplitude,
            direct_delay_ms: self.direct_delay_ms,
            t60_ms: self.t60_ms,
            coloration,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

impl FixtureSection {
    pub fn from_params(params: &[SyntheticRirParams; 4]) -> Self {
        Self {
            sample_rate: params[0].sample_rate,
            primary_left: FixtureParams::from_params(&params[0]),
            primary_right: FixtureParams::from_params(&params[1]),
            support_left: FixtureParams::from_params(&params[2]),
            support_right: FixtureParams::from_params(&params[3]),
        }
    }

    pub fn synthesize(&self) -> AppResult<[ImpulseResponse; 4]> {
        let one = |p: &FixtureParams, name: &str| -> AppResult<ImpulseResponse> {
            Ok(synth_rir(&p.params(self.sample_rate)?)?.with_label(name))
        };
        Ok([
            one(&self.primary_left, "primary_left")?,
            one(&self.primary_right, "primary_right")?,
            one(&self.support_left, "support_left")?,
            one(&self.support_right, "support_right")?,
        ])
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> AppResult<Self> {
        let config: Config = toml::from_str(text).map_err(|e| AppError::format(path, e.message().to_string()))?;
        config.check_sources(path)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn check_sources(&self, path: &Path) -> AppResult<()> {
        match (self.io.rirs.len(), &self.fixtures) {
            (0, Some(_)) | (4 | 8, None) => Ok(()),
            (0, None) => Err(AppError::format(path, "`io.rirs` lists no files and there is no [fixtures] section")),
            (_, Some(_)) => Err(AppError::format(path, "give either `io.rirs` or [fixtures], not both")),
            (n, None) => Err(AppError::format(path, format!("`io.rirs` needs 4 or 8 files, found {n}"))),
        }
    }

    /// Reads (or synthesises) the responses, averages microphone pairs if
    /// eight files are given, and balances levels.
    pub fn load_rirs(&self) -> AppResult<RirSet> {
        Ok(balance_levels(self.raw_rirs()?)?)
    }

    /// The four per-channel responses before balancing.
    pub fn raw_rirs(&self) -> AppResult<[ImpulseResponse; 4]> {
        if let Some(f) = &self.fixtures {
            return f.synthesize();
        }
        let irs = self
            .io
            .rirs
            .iter()
            .map(|p| wav::read_ir(p))
            .collect::<AppResult<Vec<_>>>()?;
        let channels: Vec<ImpulseResponse> = if irs.len() == 8 {
            irs.chunks_exact(2)
                .map(|pair| average_pair(&pair[0], &pair[1]))
                .collect::<Result<_, _>>()?
        } else {
            irs
        };
        Ok(channels.try_into().expect("four channels"))
    }

    pub fn spec(&self, sample_rate: u32) -> AppResult<FilterbankSpec> {
        self.filterbank.spec(sample_rate)
    }
}
