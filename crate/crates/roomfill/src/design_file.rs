//! Versioned plain-text (TOML) design files.
//!
//! Band centres and bandwidths are written out explicitly so a file can be
//! read and checked without rebuilding the layout, and floats use the
//! shortest round-trip representation, so a design survives a write/read
//! cycle bit-exactly.

use std::path::Path;

use roomfill_core::render::{ChannelDesign, FORMAT_VERSION};
use roomfill_core::{AnchorMode, EqualisationDesign, FilterbankSpec, RenderSettings, SolverConfig, TargetFunction};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    format_version: u32,
    filterbank: FilterbankFile,
    target: TargetFile,
    solver: SolverFile,
    render: RenderFile,
    balance: BalanceFile,
    left: ChannelFile,
    right: ChannelFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterbankFile {
    sample_rate: u32,
    f_low: f64,
    f_high: f64,
    bands_per_erb: f64,
    center_freqs: Vec<f64>,
    bandwidths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    slope_db: f64,
    f_ref_low: f64,
    f_ref_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    tolerance_db: f64,
    max_iterations: usize,
    damping: f64,
    anchor_mode: String,
    gain_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderFile {
    delay_ms: f64,
    decorrelator_len: usize,
    seed_left: u64,
    seed_right: u64,
}

/// Order: primary_left, primary_right, support_left, support_right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BalanceFile {
    gains: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    converged: bool,
    iterations_used: usize,
    offset_db: f64,
    gains: Vec<f64>,
    front_gains: Vec<f64>,
    residual_db: Vec<f64>,
}

impl From<&ChannelDesign> for ChannelFile {
    fn from(c: &ChannelDesign) -> Self {
        Self {
            converged: c.converged,
            iterations_used: c.iterations_used,
            offset_db: c.offset_db,
            gains: c.gains.clone(),
            front_gains: c.front_gains.clone(),
            residual_db: c.residual_db.clone(),
        }
    }
}

impl From<ChannelFile> for ChannelDesign {
    fn from(c: ChannelFile) -> Self {
        Self {
            gains: c.gains,
            front_gains: c.front_gains,
            offset_db: c.offset_db,
            residual_db: c.residual_db,
            iterations_used: c.iterations_used,
            converged: c.converged,
        }
    }
}

pub fn to_string(design: &EqualisationDesign) -> String {
    let spec = &design.spec;
    let file = DesignFile {
        format_version: design.format_version,
        filterbank: FilterbankFile {
            sample_rate: spec.sample_rate(),
            f_low: spec.f_low(),
            f_high: spec.f_high(),
            bands_per_erb: spec.bands_per_erb(),
            center_freqs: spec.center_freqs().to_vec(),
            bandwidths: spec.bandwidths().to_vec(),
        },
        target: TargetFile {
            slope_db: design.target.slope_db,
            f_ref_low: design.target.f_ref_low,
            f_ref_high: design.target.f_ref_high,
        },
        solver: SolverFile {
            tolerance_db: design.solver.tolerance_db,
            max_iterations: design.solver.max_iterations,
            damping: design.solver.damping,
            anchor_mode: design.solver.anchor_mode.name().to_string(),
            gain_cap: design.solver.gain_cap,
        },
        render: RenderFile {
            delay_ms: design.settings.delay_ms,
            decorrelator_len: design.settings.decorrelator_len,
            seed_left: design.settings.seed_left,
            seed_right: design.settings.seed_right,
        },
        balance: BalanceFile {
            gains: design.balance_gains,
        },
        left: (&design.left).into(),
        right: (&design.right).into(),
    };
    let body = toml::to_string(&file).expect("design serialises");
    format!("# roomfill equalisation design\n{body}")
}

pub fn from_str(text: &str, path: &Path) -> AppResult<EqualisationDesign> {
    #[derive(Deserialize)]
    struct Version {
        format_version: Option<u32>,
    }
    let version: Version = toml::from_str(text).map_err(|e| AppError::format(path, e.message().to_string()))?;
    match version.format_version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(AppError::format(path, format!("unsupported design format_version {v}"))),
        None => return Err(AppError::format(path, "missing format_version")),
    }
    let file: DesignFile = toml::from_str(text).map_err(|e| AppError::format(path, e.message().to_string()))?;
    let f = file.filterbank;
    let spec = FilterbankSpec::from_bands(f.sample_rate, f.f_low, f.f_high, f.bands_per_erb, f.center_freqs, f.bandwidths)?;
    let anchor_mode = AnchorMode::from_name(&file.solver.anchor_mode)
        .ok_or_else(|| AppError::format(path, format!("unknown anchor_mode {:?}", file.solver.anchor_mode)))?;
    let design = EqualisationDesign {
        format_version: file.format_version,
        spec,
        target: TargetFunction {
            slope_db: file.target.slope_db,
            f_ref_low: file.target.f_ref_low,
            f_ref_high: file.target.f_ref_high,
            offset_db: 0.0,
        },
        solver: SolverConfig {
            tolerance_db: file.solver.tolerance_db,
            max_iterations: file.solver.max_iterations,
            damping: file.solver.damping,
            anchor_mode,
            gain_cap: file.solver.gain_cap,
        },
        settings: RenderSettings {
            delay_ms: file.render.delay_ms,
            decorrelator_len: file.render.decorrelator_len,
            seed_left: file.render.seed_left,
            seed_right: file.render.seed_right,
        },
        balance_gains: file.balance.gains,
        left: file.left.into(),
        right: file.right.into(),
    };
    design.validate()?;
    Ok(design)
}

pub fn write(path: &Path, design: &EqualisationDesign) -> AppResult<()> {
    std::fs::write(path, to_string(design)).map_err(|e| AppError::io(path, e))
}

pub fn read(path: &Path) -> AppResult<EqualisationDesign> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    from_str(&text, path)
}
