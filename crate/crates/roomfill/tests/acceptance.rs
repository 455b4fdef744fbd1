//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomfill::design_file;
use roomfill::report::read_report;
use roomfill_core::decorrelator::{peak_cross_correlation, DEFAULT_LENGTH, DEFAULT_SEED_LEFT, DEFAULT_SEED_RIGHT};
use roomfill_core::fixtures::{notch_scenario, synth_rir, SyntheticRirParams};
use roomfill_core::render::{assemble_design, band_gain_eq, ChannelDesign};
use roomfill_core::solver::{oracle_single_band, solve_to_targets};
use roomfill_core::{
    average_pair, balance_levels, design_decorrelator, energy, AudioBuffer, Channel, EqualisationDesign, Filterbank,
    FilterbankSpec, ImpulseResponse, RenderMode, RenderSettings, Renderer, RirSet, SolverConfig, TargetFunction,
};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/notch_1k.toml")
}

fn roomfill(dir: &Path, args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_roomfill"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    out.status.code().ok_or_else(|| "killed by signal".to_string())
}

fn magnitudes(x: &[f64], n: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.next_u32() as f64 / u32::MAX as f64 * 2.0 - 1.0).collect()
}

fn a1() -> Outcome {
    let fs = 48_000;
    let fb = Filterbank::new(FilterbankSpec::default_for(fs).map_err(|e| e.to_string())?);
    let eq = band_gain_eq(&fb, &vec![1.0; fb.num_bands()]).map_err(|e| e.to_string())?;
    let n = 1 << 16;
    let mags = magnitudes(&eq, n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, m) in mags.iter().enumerate().take(n / 2) {
        let f = k as f64 * fs as f64 / n as f64;
        if (100.0..=12_800.0).contains(&f) {
            let db = 20.0 * m.log10();
            lo = lo.min(db);
            hi = hi.max(db);
        }
    }
    check(lo >= -1.0 && hi <= 1.0, format!("{lo:+.3}..{hi:+.3} dB over 100 Hz-12.8 kHz"))
}

/// Design and simulate the pinned fixture through the binary in `dir`.
fn design_and_simulate(dir: &Path) -> Result<(i32, i32), String> {
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    let design = roomfill(dir, &["design", "-c", cfg, "-o", "design.toml"])?;
    let simulate = roomfill(dir, &["simulate", "-d", "design.toml", "-c", cfg, "-o", "report.csv"])?;
    Ok((design, simulate))
}

fn a2(dir: &Path) -> Outcome {
    let (design_code, sim_code) = design_and_simulate(dir)?;
    let design = design_file::read(&dir.join("design.toml")).map_err(|e| e.to_string())?;
    let iterations = [design.left.iterations_used, design.right.iterations_used];
    let mut max_dev: f64 = 0.0;
    for side in ["left", "right"] {
        let r = read_report(&dir.join(format!("report_{side}.csv"))).map_err(|e| e.to_string())?;
        max_dev = max_dev.max(r.summary.max_abs_deviation_filled_bands);
    }
    check(
        design_code == 0 && sim_code == 0 && design.converged() && iterations.iter().all(|&i| i <= 50) && max_dev <= 1.0,
        format!("design exit {design_code}, iterations {iterations:?}, simulate exit {sim_code}, max |dev| {max_dev:.3} dB"),
    )
}

fn a3() -> Outcome {
    let fs = 48_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig {
        tolerance_db: 0.02,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let fc = 200.0 * (40.0f64).powf(rng.next_u32() as f64 / u32::MAX as f64);
        let fb = Filterbank::new(FilterbankSpec::new(fs, fc, fc, 1.0).map_err(|e| e.to_string())?);
        let room = |seed: u64, t60: f64| {
            synth_rir(&SyntheticRirParams {
                length_ms: 3.0 * t60,
                t60_ms: t60,
                seed,
                ..Default::default()
            })
        };
        let t60 = 80.0 + 220.0 * (rng.next_u32() as f64 / u32::MAX as f64);
        let primary = room(1000 + k, t60).map_err(|e| e.to_string())?;
        let support = room(2000 + k, t60).map_err(|e| e.to_string())?;
        let p = fb.ir_band_energies(&primary).map_err(|e| e.to_string())?[0];
        let target = p * (2.0 + 8.0 * (rng.next_u32() as f64 / u32::MAX as f64));
        let set = solve_to_targets(&fb, &primary, &support, vec![target], 0.0, &cfg).map_err(|e| e.to_string())?;
        let oracle = oracle_single_band(&fb, &primary, &support, target, 0, cfg.gain_cap).map_err(|e| e.to_string())?;
        worst = worst.max((set.gains[0] - oracle).abs() / oracle);
    }
    check(worst <= 1e-2, format!("worst relative gain difference {worst:.2e} over 10 fixtures"))
}

fn made_up_design(fs: u32, delay_ms: f64) -> Result<EqualisationDesign, String> {
    let fb = Filterbank::new(FilterbankSpec::default_for(fs).map_err(|e| e.to_string())?);
    let nb = fb.num_bands();
    let ch = |k: usize| ChannelDesign {
        gains: (0..nb).map(|b| 0.1 + 0.1 * ((b + k) % 4) as f64).collect(),
        front_gains: vec![1.0; nb],
        offset_db: 0.0,
        residual_db: vec![0.0; nb],
        iterations_used: 0,
        converged: true,
    };
    let ir = ImpulseResponse::new(fs, vec![1.0], "x").map_err(|e| e.to_string())?;
    let rirs = RirSet::with_gains([ir.clone(), ir.clone(), ir.clone(), ir], [1.0; 4]).map_err(|e| e.to_string())?;
    let settings = RenderSettings {
        delay_ms,
        ..Default::default()
    };
    assemble_design(&fb, &rirs, &TargetFunction::default(), &SolverConfig::default(), &settings, ch(0), ch(1))
        .map_err(|e| e.to_string())
}

fn a4(dir: &Path) -> Outcome {
    let design = design_file::read(&dir.join("design.toml")).map_err(|e| e.to_string())?;
    let renderer = Renderer::new(&design).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut identical = 0;
    for k in 0..10 {
        let len = 1000 + 517 * k;
        let input = AudioBuffer::new(48_000, vec![random_signal(&mut rng, len), random_signal(&mut rng, len)])
            .map_err(|e| e.to_string())?;
        let out = renderer.render(&input, RenderMode::Proposed).map_err(|e| e.to_string())?.buffer;
        let same = (0..2).all(|c| {
            let head = &out.channel(c)[..len];
            head.iter().zip(input.channel(c)).all(|(a, b)| a.to_bits() == b.to_bits())
                && out.channel(c)[len..].iter().all(|&v| v == 0.0)
        });
        identical += same as usize;
    }
    check(identical == 10, format!("{identical}/10 inputs with bit-identical FL/FR"))
}

fn a5() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for fs in [44_100u32, 48_000] {
        let design = made_up_design(fs, 10.0)?;
        let renderer = Renderer::new(&design).map_err(|e| e.to_string())?;
        let mut x = vec![0.0; 2000];
        x[50] = 1.0;
        let input = AudioBuffer::new(fs, vec![x.clone(), x]).map_err(|e| e.to_string())?;
        let out = renderer.render(&input, RenderMode::Proposed).map_err(|e| e.to_string())?.buffer;
        let onset = |c: usize| out.channel(c).iter().position(|&v| v != 0.0).unwrap_or(usize::MAX) as i64;
        let expected = (0.010 * fs as f64).round() as i64;
        for (f, s) in [(0, 2), (1, 3)] {
            let lag = onset(s) - onset(f);
            ok &= (lag - expected).abs() <= 1;
            details.push(format!("{fs} Hz lag {lag}/{expected}"));
        }
    }
    for (delay, valid) in [(1.99, false), (2.0, true), (50.0, true), (50.01, false)] {
        let s = RenderSettings {
            delay_ms: delay,
            ..Default::default()
        };
        ok &= s.validate().is_ok() == valid;
    }
    details.push("delay outside [2, 50] ms rejected".into());
    check(ok, details.join(", "))
}

fn a6() -> Outcome {
    let mut worst_db: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_energy: f64 = 0.0;
    for seed in [DEFAULT_SEED_LEFT, DEFAULT_SEED_RIGHT, 3, 4, 5] {
        let d = design_decorrelator(DEFAULT_LENGTH, seed).map_err(|e| e.to_string())?;
        for m in magnitudes(d.taps(), DEFAULT_LENGTH) {
            worst_db = worst_db.max((20.0 * m.log10()).abs());
        }
        for _ in 0..4 {
            let block = random_signal(&mut rng, DEFAULT_LENGTH);
            let out = d.apply_circular(&block).map_err(|e| e.to_string())?;
            worst_energy = worst_energy.max((energy(&out) / energy(&block) - 1.0).abs());
        }
    }
    let l = design_decorrelator(DEFAULT_LENGTH, DEFAULT_SEED_LEFT).map_err(|e| e.to_string())?;
    let r = design_decorrelator(DEFAULT_LENGTH, DEFAULT_SEED_RIGHT).map_err(|e| e.to_string())?;
    let xc = peak_cross_correlation(l.taps(), r.taps());
    check(
        worst_db <= 0.01 && xc < 0.3 && worst_energy <= 1e-6,
        format!("max |mag| {worst_db:.2e} dB, L/R xcorr peak {xc:.3}, energy error {worst_energy:.1e}"),
    )
}

fn a7() -> Outcome {
    let t = TargetFunction::default();
    let drop = t.level_at(20.0) - t.level_at(20_000.0);
    check(drop == 5.0, format!("level(20 Hz) - level(20 kHz) = {drop} dB"))
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exact = true;
    for _ in 0..20 {
        let len = 10 + (rng.next_u32() % 500) as usize;
        let x = ImpulseResponse::new(48_000, random_signal(&mut rng, len), "x").map_err(|e| e.to_string())?;
        let same = average_pair(&x, &x).map_err(|e| e.to_string())?;
        let cancel = average_pair(&x, &x.scaled(-1.0)).map_err(|e| e.to_string())?;
        exact &= same.samples() == x.samples();
        exact &= cancel.samples().iter().all(|&v| v == 0.0);
    }
    let irs = notch_scenario(48_000).map(|p| synth_rir(&p).unwrap());
    let scaled = [irs[0].scaled(0.3), irs[1].scaled(2.0), irs[2].scaled(0.05), irs[3].scaled(7.0)];
    let set = balance_levels(scaled).map_err(|e| e.to_string())?;
    let reference = energy(set.balanced(Channel::PrimaryLeft).samples());
    let spread = Channel::ALL
        .iter()
        .map(|&c| (10.0 * (energy(set.balanced(c).samples()) / reference).log10()).abs())
        .fold(0.0, f64::max);
    check(
        exact && spread <= 0.01,
        format!("identities exact: {exact}, post-balance spread {spread:.2e} dB"),
    )
}

fn a9(first: &Path) -> Outcome {
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (d, s) = design_and_simulate(second.path())?;
    if d != 0 || s != 0 {
        return Err(format!("second run exit codes {d}/{s}"));
    }
    let mut differing = Vec::new();
    for name in ["design.toml", "report_left.csv", "report_right.csv"] {
        let a = fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(second.path().join(name)).map_err(|e| e.to_string())?;
        if a != b {
            differing.push(name);
        }
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "design file and both CSV reports byte-identical across two runs".into()
        } else {
            format!("differs: {differing:?}")
        },
    )
}

fn a10() -> Outcome {
    let design = made_up_design(48_000, 10.0)?;
    let renderer = Renderer::new(&design).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ok = true;
    for _ in 0..5 {
        let input = AudioBuffer::new(48_000, vec![random_signal(&mut rng, 2500), random_signal(&mut rng, 2500)])
            .map_err(|e| e.to_string())?;
        let st = renderer.render(&input, RenderMode::Stereo).map_err(|e| e.to_string())?.buffer;
        ok &= st.channel(2).iter().chain(st.channel(3)).all(|v| v.to_bits() == 0);
        ok &= &st.channels()[..2] == input.channels();
        let rs = renderer.render(&input, RenderMode::RearStereo).map_err(|e| e.to_string())?.buffer;
        for (f, r) in [(0, 2), (1, 3)] {
            ok &= rs.channel(f).iter().zip(rs.channel(r)).all(|(a, b)| a.to_bits() == b.to_bits());
        }
        ok &= &rs.channels()[..2] == input.channels();
    }
    check(ok, "stereo rears digitally silent, rear_stereo rears bit-identical to fronts".into())
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let dir = work.path().to_path_buf();
    type Criterion<'a> = (&'a str, Option<Duration>, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("A1", Some(Duration::from_secs(5)), Box::new(a1)),
        ("A2", Some(Duration::from_secs(60)), Box::new(|| a2(&dir))),
        ("A3", Some(Duration::from_secs(30)), Box::new(a3)),
        ("A4", None, Box::new(|| a4(&dir))),
        ("A5", None, Box::new(a5)),
        ("A6", None, Box::new(a6)),
        ("A7", None, Box::new(a7)),
        ("A8", None, Box::new(a8)),
        ("A9", None, Box::new(|| a9(&dir))),
        ("A10", None, Box::new(a10)),
    ];
    let mut failed = 0;
    for (name, budget, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {:?} budget", budget.unwrap())),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{name:<4} {status}  {detail}  [{:.2} s]", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
