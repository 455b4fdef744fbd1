//! The `roomfill` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use roomfill_core::fixtures::{synth_rir, Coloration, SyntheticRirParams};
use roomfill_core::{average_pair, RenderMode, Renderer, Side};

use crate::config::Config;
use crate::error::{exit, AppError, AppResult};
use crate::wav::{self, WavFormat};
use crate::{design_file, pipeline, report};

#[derive(Debug, Parser)]
#[command(
    name = "roomfill",
    version,
    about = "Room equalisation by filling the reverberant field through supporting loudspeakers",
    after_help = "Exit codes: 0 success, 1 verification failed, 2 usage or validation error, \
                  3 solver did not converge, 4 unfillable bands.\n\
                  Multichannel output is always ordered FL, FR, SL, SR."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic room impulse response.
    SynthRir(SynthRirArgs),
    /// Average two measurements of the same loudspeaker.
    AvgRir(AvgRirArgs),
    /// Solve per-band fill gains and write a design file.
    Design(DesignArgs),
    /// Render stereo input to FL, FR, SL, SR for one playback condition.
    Render(RenderArgs),
    /// Simulate playback through the room responses and check the target.
    Simulate(SimulateArgs),
    /// Print the summary of a written CSV report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthRirArgs {
    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 900.0)]
    pub length_ms: f64,
    /// Reverberation time; the noise tail decays 60 dB over this time.
    #[arg(long, default_value_t = 300.0)]
    pub t60_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    pub direct_amplitude: f64,
    #[arg(long, default_value_t = 5.0)]
    pub direct_delay_ms: f64,
    /// Peaking cut as F0_HZ,DEPTH_DB,Q.
    #[arg(long, value_name = "F0,DEPTH,Q", value_parser = parse_notch, conflicts_with = "lowpass")]
    pub notch: Option<[f64; 3]>,
    /// Second-order Butterworth low-pass cutoff in Hz.
    #[arg(long, value_name = "FC_HZ")]
    pub lowpass: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    pub format: WavFormat,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_notch(text: &str) -> Result<[f64; 3], String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("not a number: {v:?}")))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|_| "expected three comma-separated values F0_HZ,DEPTH_DB,Q".to_string())
}

#[derive(Debug, Args)]
pub struct AvgRirArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    pub format: WavFormat,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Defaults to `design.toml` in the config's output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Print the solver's per-iteration residuals.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Proposed,
    Stereo,
    #[value(name = "rear_stereo", alias = "rear-stereo")]
    RearStereo,
    #[value(name = "front_eq", alias = "front-eq")]
    FrontEq,
}

impl From<ModeArg> for RenderMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Proposed => RenderMode::Proposed,
            ModeArg::Stereo => RenderMode::Stereo,
            ModeArg::RearStereo => RenderMode::RearStereo,
            ModeArg::FrontEq => RenderMode::FrontEq,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(short, long)]
    pub design: PathBuf,
    /// Stereo WAV.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long, value_enum, default_value_t = ModeArg::Proposed)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    pub format: WavFormat,
    /// Four-channel WAV, FL, FR, SL, SR.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Left,
    Right,
    Both,
}

impl ChannelArg {
    fn sides(self) -> &'static [Side] {
        match self {
            ChannelArg::Left => &[Side::Left],
            ChannelArg::Right => &[Side::Right],
            ChannelArg::Both => &Side::BOTH,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub design: PathBuf,
    #[arg(short, long)]
    pub config: PathBuf,
    /// Report path; `<stem>_left.csv` and `<stem>_right.csv` are written
    /// next to it. Defaults to `report.csv` in the config's output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ChannelArg::Both)]
    pub channel: ChannelArg,
    /// Largest |total − target| allowed over filled bands.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_db: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more CSV reports written by `simulate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

/// Parses `args` and runs the command, writing human-readable output to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<i32> {
    match command {
        Command::SynthRir(a) => synth_rir_cmd(a, out, err),
        Command::AvgRir(a) => avg_rir_cmd(a, out, err),
        Command::Design(a) => design_cmd(a, out, err),
        Command::Render(a) => render_cmd(a, out, err),
        Command::Simulate(a) => simulate_cmd(a, out),
        Command::Report(a) => report_cmd(a, out),
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) {
    let _ = writeln!(out, "{}", text.as_ref());
}

fn clip_warning(err: &mut dyn Write, path: &Path, clipped: usize) {
    if clipped > 0 {
        say(err, format!("warning: {}: {clipped} samples clipped", path.display()));
    }
}

fn synth_rir_cmd(a: SynthRirArgs, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<i32> {
    let coloration = match (a.notch, a.lowpass) {
        (Some(n), _) => Coloration::Notch {
            f0: n[0],
            depth_db: n[1],
            q: n[2],
        },
        (None, Some(fc)) => Coloration::Lowpass { fc },
        (None, None) => Coloration::None,
    };
    let params = SyntheticRirParams {
        sample_rate: a.sample_rate,
        length_ms: a.length_ms,
        direct_amplitude: a.direct_amplitude,
        direct_delay_ms: a.direct_delay_ms,
        t60_ms: a.t60_ms,
        coloration,
        seed: a.seed,
    };
    let ir = synth_rir(&params)?;
    for w in params.warnings() {
        say(err, format!("warning: {w}"));
    }
    let report = wav::write_ir(&a.output, &ir, a.format)?;
    clip_warning(err, &a.output, report.clipped);
    say(out, format!("{}: {} samples at {} Hz, {}", a.output.display(), ir.len(), a.sample_rate, params.describe()));
    Ok(exit::OK)
}

fn avg_rir_cmd(a: AvgRirArgs, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<i32> {
    let x = wav::read_ir(&a.first)?;
    let y = wav::read_ir(&a.second)?;
    let avg = average_pair(&x, &y)?;
    let report = wav::write_ir(&a.output, &avg, a.format)?;
    clip_warning(err, &a.output, report.clipped);
    say(out, format!("{}: {} samples", a.output.display(), avg.len()));
    Ok(exit::OK)
}

fn ensure_dir(dir: &Path) -> AppResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

fn design_cmd(a: DesignArgs, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<i32> {
    let config = Config::load(&a.config)?;
    let path = match a.output {
        Some(p) => p,
        None => {
            ensure_dir(&config.io.output_dir)?;
            config.io.output_dir.join("design.toml")
        }
    };
    let (run, _) = pipeline::design_from_config(&config)?;
    design_file::write(&path, &run.design)?;

    for (side, set) in Side::BOTH.iter().zip(&run.sets) {
        let filled = set.gains.iter().filter(|&&g| g > 0.0).count();
        say(
            out,
            format!(
                "{:<5} iterations {:>2}  converged {:<5}  filled bands {:>2}/{}  max |residual| {:.3} dB  offset {:+.2} dB",
                side.name(),
                set.iterations_used,
                set.converged,
                filled,
                set.gains.len(),
                set.max_filled_residual_db(),
                set.offset_db
            ),
        );
        if !set.capped.is_empty() {
            say(err, format!("warning: {} bands held at the gain cap: {:?}", side.name(), set.capped));
        }
        if a.trace {
            for row in &set.trace {
                say(out, format!("  {} iter {:>2}  max residual {:.4} dB", side.name(), row.iteration, row.max_residual_db));
            }
        }
    }
    say(out, format!("wrote {}", path.display()));
    if run.design.converged() {
        Ok(exit::OK)
    } else {
        say(err, "error: solver did not converge; best-effort design written");
        Ok(exit::NOT_CONVERGED)
    }
}

fn render_cmd(a: RenderArgs, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<i32> {
    let design = design_file::read(&a.design)?;
    let input = wav::read_wav(&a.input)?;
    let renderer = Renderer::new(&design)?;
    let mode = RenderMode::from(a.mode);
    let rendered = renderer.render(&input, mode)?;
    let report = wav::write_wav(&a.output, &rendered.buffer, a.format)?;
    clip_warning(err, &a.output, report.clipped);
    let l = rendered.latency;
    say(out, format!("{}: mode {}, {} frames, channels FL FR SL SR", a.output.display(), mode.name(), rendered.buffer.len()));
    say(
        out,
        format!(
            "latency (samples): front {}  support delay {}  eq alignment {}  decorrelator peak {:?}  support total {:?}",
            l.front, l.support_delay, l.eq_alignment, l.decorrelator_peak, l.support_total
        ),
    );
    Ok(exit::OK)
}

/// `<stem>_<side>.csv` next to `base`.
pub fn report_path(base: &Path, side: Side) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    base.with_file_name(format!("{stem}_{}.csv", side.name()))
}

fn simulate_cmd(a: SimulateArgs, out: &mut dyn Write) -> AppResult<i32> {
    if !(a.tolerance_db > 0.0) {
        return Err(AppError::Usage("invalid `--tolerance-db`: must be positive".into()));
    }
    let design = design_file::read(&a.design)?;
    let config = Config::load(&a.config)?;
    let base = match a.output {
        Some(p) => p,
        None => {
            ensure_dir(&config.io.output_dir)?;
            config.io.output_dir.join("report.csv")
        }
    };
    let reports = pipeline::simulate(&design, &config, a.channel.sides())?;
    let mut pass = true;
    for (side, r) in &reports {
        let path = report_path(&base, *side);
        report::export_report(r, &path)?;
        say(out, report::summary_table(&format!("{} ({})", side.name(), path.display()), r));
        pass &= r.summary.passes(a.tolerance_db);
    }
    say(out, if pass { "verification passed" } else { "verification FAILED" });
    Ok(if pass { exit::OK } else { exit::VERIFY_FAILED })
}

fn report_cmd(a: ReportArgs, out: &mut dyn Write) -> AppResult<i32> {
    for path in &a.reports {
        let r = report::read_report(path)?;
        say(out, report::summary_table(&path.display().to_string(), &r));
    }
    Ok(exit::OK)
}
