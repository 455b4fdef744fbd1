use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomfill_core::render::{assemble_design, band_gain_eq, ChannelDesign};
use roomfill_core::{
    AudioBuffer, EqualisationDesign, Error, Filterbank, FilterbankSpec, ImpulseResponse, RenderMode,
    RenderSettings, Renderer, RirSet, Side, SolverConfig, TargetFunction,
};
use std::f64::consts::PI;
use std::sync::OnceLock;

fn bank(fs: u32) -> &'static Filterbank {
    static B48: OnceLock<Filterbank> = OnceLock::new();
    static B44: OnceLock<Filterbank> = OnceLock::new();
    let cell = if fs == 48_000 { &B48 } else { &B44 };
    cell.get_or_init(|| Filterbank::new(FilterbankSpec::default_for(fs).unwrap()))
}

/// |X(f)| of a finite sequence by direct evaluation of the DTFT.
fn dtft_mag(x: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * PI * f / fs;
    x.iter()
        .enumerate()
        .map(|(n, &v)| v * Complex64::from_polar(1.0, -w * n as f64))
        .sum::<Complex64>()
        .norm()
}

fn channel(gains: Vec<f64>, front: Vec<f64>) -> ChannelDesign {
    let n = gains.len();
    ChannelDesign {
        gains,
        front_gains: front,
        offset_db: 0.0,
        residual_db: vec![0.0; n],
        iterations_used: 0,
        converged: true,
    }
}

/// A design with made-up gains; rendering does not care how they were found.
fn synthetic_design(fs: u32, settings: RenderSettings) -> EqualisationDesign {
    let fb = bank(fs);
    let nb = fb.num_bands();
    let left: Vec<f64> = (0..nb).map(|b| 0.2 + 0.1 * (b % 5) as f64).collect();
    let right: Vec<f64> = (0..nb).map(|b| if b % 3 == 0 { 0.0 } else { 0.7 }).collect();
    let front = vec![1.0; nb];
    let unit = ImpulseResponse::new(fs, vec![1.0, 0.5, 0.25], "x").unwrap();
    let rirs = RirSet::with_gains([unit.clone(), unit.clone(), unit.clone(), unit], [1.0, 0.8, 1.3, 0.6]).unwrap();
    assemble_design(
        fb,
        &rirs,
        &TargetFunction::default(),
        &SolverConfig::default(),
        &settings,
        channel(left, front.clone()),
        channel(right, front),
    )
    .unwrap()
}

fn design48() -> &'static EqualisationDesign {
    static D: OnceLock<EqualisationDesign> = OnceLock::new();
    D.get_or_init(|| synthetic_design(48_000, RenderSettings::default()))
}

fn renderer48() -> &'static Renderer {
    static R: OnceLock<Renderer> = OnceLock::new();
    R.get_or_init(|| Renderer::with_filterbank(design48(), bank(48_000)).unwrap())
}

fn random_stereo(seed: u64, len: usize) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = || (0..len).map(|_| (rng.next_u32() as f64 / u32::MAX as f64) * 2.0 - 1.0).collect::<Vec<_>>();
    let l = ch();
    let r = ch();
    AudioBuffer::new(48_000, vec![l, r]).unwrap()
}

#[test]
fn unity_eq_is_a_delayed_impulse() {
    let fb = bank(48_000);
    let eq = band_gain_eq(fb, &vec![1.0; fb.num_bands()]).unwrap();
    let peak = (0..eq.len()).max_by(|&a, &b| eq[a].abs().total_cmp(&eq[b].abs())).unwrap();
    assert_eq!(peak, fb.latency());
    for f in [250.0, 1000.0, 4000.0, 10_000.0] {
        let db = 20.0 * dtft_mag(&eq, f, 48_000.0).log10();
        assert!(db.abs() <= 1.0, "{f} Hz: {db:.2} dB");
    }
}

#[test]
fn zero_gains_give_zero_eq() {
    let fb = bank(48_000);
    let eq = band_gain_eq(fb, &vec![0.0; fb.num_bands()]).unwrap();
    assert!(eq.iter().all(|&v| v == 0.0));
    assert!(band_gain_eq(fb, &[1.0; 3]).is_err());
}

#[test]
fn single_band_gain_two() {
    let fb = bank(48_000);
    let nb = fb.num_bands();
    let freqs = fb.spec().center_freqs();
    let unity = band_gain_eq(fb, &vec![1.0; nb]).unwrap();
    for b in [5, 12, 20, 30] {
        let mut one = vec![0.0; nb];
        one[b] = 1.0;
        let mut two = one.clone();
        two[b] = 2.0;
        let e1 = band_gain_eq(fb, &one).unwrap();
        let e2 = band_gain_eq(fb, &two).unwrap();
        let fc = freqs[b];
        let at = |x: &[f64]| dtft_mag(x, fc, 48_000.0);
        assert!((20.0 * (at(&e2) / at(&e1)).log10() - 6.0206).abs() < 1e-6);

        // A lone band carries only part of the unity level at its centre,
        // because its neighbours overlap there.
        let vs_unity = 20.0 * (at(&e2) / at(&unity)).log10();
        assert!((2.0..=3.5).contains(&vs_unity), "band {b}: {vs_unity:.2} dB");

        let bw = fb.spec().bandwidths()[b];
        let grid: Vec<f64> = (-40..=40).map(|k| fc + bw * k as f64 / 40.0).collect();
        let peak = grid.iter().copied().max_by(|&x, &y| at_f(&e2, x).total_cmp(&at_f(&e2, y))).unwrap();
        assert!((peak - fc).abs() <= 0.1 * bw, "band {b}: peak {peak:.1} Hz vs {fc:.1} Hz");
    }
}

fn at_f(x: &[f64], f: f64) -> f64 {
    dtft_mag(x, f, 48_000.0)
}

#[test]
fn proposed_fronts_are_untouched() {
    let r = renderer48();
    for seed in 0..10 {
        let input = random_stereo(seed, 2000 + 37 * seed as usize);
        let out = r.render(&input, RenderMode::Proposed).unwrap().buffer;
        assert_eq!(out.num_channels(), 4);
        for c in 0..2 {
            let n = input.len();
            let got: Vec<u64> = out.channel(c)[..n].iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = input.channel(c).iter().map(|v| v.to_bits()).collect();
            assert_eq!(got, want, "seed {seed} channel {c}");
            assert!(out.channel(c)[n..].iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn silent_input_silent_output() {
    let input = AudioBuffer::silence(48_000, 2, 500).unwrap();
    for mode in RenderMode::ALL {
        let out = renderer48().render(&input, mode).unwrap().buffer;
        assert_eq!(out.num_channels(), 4);
        assert!(out.channels().iter().flatten().all(|&v| v == 0.0), "{}", mode.name());
    }
}

fn first_nonzero(x: &[f64]) -> Option<usize> {
    x.iter().position(|&v| v != 0.0)
}

#[test]
fn support_onset_lag_is_the_delay() {
    for fs in [44_100u32, 48_000] {
        for delay_ms in [2.0, 10.0, 50.0] {
            let settings = RenderSettings {
                delay_ms,
                ..Default::default()
            };
            let design = synthetic_design(fs, settings);
            let r = Renderer::with_filterbank(&design, bank(fs)).unwrap();
            let mut l = vec![0.0; 4000];
            l[123] = 0.5;
            let input = AudioBuffer::new(fs, vec![l.clone(), l]).unwrap();
            let out = r.render(&input, RenderMode::Proposed).unwrap().buffer;
            let expected = (delay_ms * fs as f64 / 1000.0).round() as usize;
            for (front, support) in [(0, 2), (1, 3)] {
                let lag = first_nonzero(out.channel(support)).unwrap() as i64 - first_nonzero(out.channel(front)).unwrap() as i64;
                assert!(lag.abs_diff(expected as i64) <= 1, "{fs} Hz {delay_ms} ms: {lag} vs {expected}");
            }
        }
    }
}

#[test]
fn stereo_modes_are_bit_exact() {
    let r = renderer48();
    let input = random_stereo(99, 3000);
    let stereo = r.render(&input, RenderMode::Stereo).unwrap().buffer;
    assert_eq!(&stereo.channels()[..2], input.channels());
    assert!(stereo.channel(2).iter().chain(stereo.channel(3)).all(|v| v.to_bits() == 0));

    let rear = r.render(&input, RenderMode::RearStereo).unwrap().buffer;
    for (a, b) in [(0, 2), (1, 3)] {
        let x: Vec<u64> = rear.channel(a).iter().map(|v| v.to_bits()).collect();
        let y: Vec<u64> = rear.channel(b).iter().map(|v| v.to_bits()).collect();
        assert_eq!(x, y);
    }
    assert_eq!(&rear.channels()[..2], input.channels());

    let front = r.render(&input, RenderMode::FrontEq).unwrap().buffer;
    assert!(front.channel(2).iter().chain(front.channel(3)).all(|&v| v == 0.0));
    assert!(front.channel(0).iter().any(|&v| v != 0.0));
}

#[test]
fn render_contract_errors() {
    let r = renderer48();
    let mono = AudioBuffer::mono(48_000, vec![0.1; 10]).unwrap();
    assert!(matches!(r.render(&mono, RenderMode::Proposed), Err(Error::Invalid { field: "input", .. })));
    let wrong_rate = AudioBuffer::silence(44_100, 2, 10).unwrap();
    assert!(matches!(
        r.render(&wrong_rate, RenderMode::Stereo),
        Err(Error::RateMismatch { expected: 48_000, found: 44_100 })
    ));

    let mut bad = design48().clone();
    bad.settings.delay_ms = 60.0;
    assert!(Renderer::new(&bad).is_err());
    let mut bad = design48().clone();
    bad.left.gains[0] = -1.0;
    assert!(Renderer::new(&bad).is_err());
}

#[test]
fn latency_metadata_matches_cross_correlation() {
    let r = renderer48();
    let mut x = vec![0.0; 64];
    x[0] = 1.0;
    let input = AudioBuffer::new(48_000, vec![x.clone(), x]).unwrap();
    let rendered = r.render(&input, RenderMode::Proposed).unwrap();
    let lat = rendered.latency;
    assert_eq!(lat.support_delay, 480);
    assert_eq!(lat.eq_alignment, bank(48_000).latency());
    assert_eq!(lat.front, 0);
    for (side, (front, support)) in [(0, 2), (1, 3)].into_iter().enumerate() {
        let f = rendered.buffer.channel(front);
        let s = rendered.buffer.channel(support);
        // Full cross-correlation over non-negative lags.
        let xc = |lag: usize| -> f64 { f.iter().zip(&s[lag..]).map(|(a, b)| a * b).sum::<f64>().abs() };
        let peak = (0..s.len()).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert!(
            peak.abs_diff(lat.support_total[side]) <= 1,
            "side {side}: xcorr peak {peak}, metadata {}",
            lat.support_total[side]
        );
    }
    assert_eq!(r.latency(RenderMode::FrontEq).front, bank(48_000).latency());
    assert_eq!(r.latency(RenderMode::Stereo).support_total, [0, 0]);
}

#[test]
fn support_impulse_is_the_chain() {
    let r = renderer48();
    for side in Side::BOTH {
        let ir = r.support_impulse(side).unwrap();
        assert_eq!(ir.samples(), &r.support_signal(side, &[1.0])[..]);
    }
}

