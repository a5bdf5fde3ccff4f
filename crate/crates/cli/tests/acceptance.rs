//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use biphoton_core::angmom::CascadeLevels;
use biphoton_core::entanglement::{concurrence, entanglement_of_formation, fidelity, trace_distance};
use biphoton_core::polstate::{
    density_from_ket, ket_from_path, predict_path_state, Basis, BiphotonKet, DensityMatrix4,
};
use biphoton_core::timecorr::{
    convolve_jitter, expected_histogram, fit_beats, fit_single, g2_beats, g2_beats_from_amplitudes, simulate_histogram,
    BeatFitOptions, BeatModelParams, G2Model, Preset, SingleFitOptions, SinglePathParams, HYPERFINE_BEAT_RAD_PER_NS,
};
use biphoton_core::tomography::{
    expected_records, reconstruct_linear, reconstruct_mle, resample_uncertainties, simulate_counts, standard_settings,
    SettingsKind,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_biphoton");

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn run(args: &[&str]) -> (Vec<u8>, Duration) {
    let start = Instant::now();
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    let elapsed = start.elapsed();
    assert!(
        out.status.success(),
        "biphoton {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (out.stdout, elapsed)
}

fn run_json(args: &[&str]) -> (Value, Duration) {
    let (bytes, t) = run(args);
    (serde_json::from_slice(&bytes).expect("JSON output"), t)
}

fn path_x_density(visibility: f64) -> (BiphotonKet, DensityMatrix4) {
    let ket = ket_from_path(&predict_path_state(&CascadeLevels::PATH_X).unwrap());
    let rho = density_from_ket(&ket).mix(&DensityMatrix4::maximally_mixed(Basis::Linear), visibility);
    (ket, rho)
}

fn state_prediction() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (path, a0, a1) in [("X", 0.55, 0.83), ("Y", 0.92, 0.39)] {
        let (doc, t) = run_json(&["predict", "--path", path]);
        let amps = &doc["result"]["amplitudes"];
        let (g0, g1, phi) = (
            amps["a0"].as_f64().unwrap(),
            amps["a1"].as_f64().unwrap(),
            amps["phi0"].as_f64().unwrap(),
        );
        let ok = (g0 - a0).abs() <= 0.005
            && (g1 - a1).abs() <= 0.005
            && (phi.cos() + 1.0).abs() < 1e-12
            && t.as_secs_f64() < 1.0;
        pass &= ok;
        detail.push(format!(
            "{path}: ({g0:.4}, {g1:.4}, cos phi0 = {:.0}) in {:.3} s",
            phi.cos(),
            t.as_secs_f64()
        ));
    }
    Outcome::new(pass, detail.join("; "))
}

fn metric_identities() -> Outcome {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let bell = BiphotonKet::new(
        Basis::Linear,
        [C64::new(r, 0.0), C64::default(), C64::default(), C64::new(r, 0.0)],
    )
    .unwrap();
    let rho = density_from_ket(&bell);
    let (c, e) = (concurrence(&rho), entanglement_of_formation(&rho));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a: [C64; 4] = std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let ket = BiphotonKet::normalized(Basis::Linear, a).unwrap();
        let [p, q, s, t] = ket.amplitudes;
        let oracle = 2.0 * (p * t - q * s).norm();
        worst = worst.max((concurrence(&density_from_ket(&ket)) - oracle).abs());
    }
    let pass = (c - 1.0).abs() <= 1e-10 && (e - 1.0).abs() <= 1e-10 && worst <= 1e-10;
    Outcome::new(
        pass,
        format!(
            "Bell C-1 = {:.1e}, EoF-1 = {:.1e}; max |C - 2|ad-bc|| over 1000 = {worst:.1e}",
            c - 1.0,
            e - 1.0
        ),
    )
}

fn tomography_round_trip() -> Outcome {
    let start = Instant::now();
    let (ket, rho) = path_x_density(1.0);
    let settings = standard_settings(SettingsKind::Overcomplete36);
    let mut fids = Vec::new();
    let mut psd = true;
    for seed in 0..20 {
        let records = simulate_counts(&rho, &settings, 1e5, seed);
        let est = reconstruct_mle(&records).unwrap();
        psd &= est.rho.min_eigenvalue() >= -1e-12;
        fids.push(fidelity(&est.rho, &ket));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mean = fids.iter().sum::<f64>() / fids.len() as f64;
    let min = fids.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = mean >= 0.995 && min >= 0.99 && psd && elapsed < 60.0;
    Outcome::new(
        pass,
        format!("mean F = {mean:.5}, min F = {min:.5}, PSD in all runs = {psd}, {elapsed:.2} s"),
    )
}

fn estimator_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [SettingsKind::Minimal16, SettingsKind::Overcomplete36] {
        for visibility in [1.0, 0.9] {
            let (_, rho) = path_x_density(visibility);
            let records = expected_records(&rho, &standard_settings(kind), 1e5);
            let lin = reconstruct_linear(&records).unwrap();
            let mle = reconstruct_mle(&records).unwrap();
            worst = worst.max(trace_distance(&lin.rho, &mle.rho));
        }
    }
    Outcome::new(worst <= 1e-5, format!("max trace distance = {worst:.2e}"))
}

fn uncertainty_scaling() -> Outcome {
    let (_, rho) = path_x_density(0.95);
    let settings = standard_settings(SettingsKind::Overcomplete36);
    let std_at = |n: f64| {
        let records = simulate_counts(&rho, &settings, n, 5);
        resample_uncertainties(&records, 200, 6, None).unwrap().concurrence.std
    };
    let (low, high) = (std_at(1e3), std_at(1e5));
    let ratio = low / high;
    Outcome::new(
        (5.0..=15.0).contains(&ratio),
        format!("std(C) {low:.4} -> {high:.5}, ratio {ratio:.2}"),
    )
}

fn single_truth(preset: Preset) -> SinglePathParams {
    match preset.model() {
        G2Model::Single(p) => p,
        G2Model::Beats(_) => unreachable!(),
    }
}

fn beat_truth(preset: Preset) -> BeatModelParams {
    match preset.model() {
        G2Model::Beats(p) => p,
        G2Model::Single(_) => unreachable!(),
    }
}

fn decay_fit_recovery() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (preset, sigma_ref) in [(Preset::Fig2x, 0.1), (Preset::Fig2y, 0.2)] {
        let truth = single_truth(preset);
        let peak = expected_histogram(&truth, preset.bin_width(), preset.t_range())
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        let init = SinglePathParams {
            g0: 1000.0,
            tau_r: 2.0,
            tau_d: 8.0,
            background: 1.0,
            offset: 0.0,
        };
        let (mut worst_d, mut worst_r, mut sigma_d): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for seed in 0..5 {
            let h = simulate_histogram(&truth, preset.bin_width(), preset.t_range(), seed).unwrap();
            let fit = fit_single(&h, &init, &SingleFitOptions::default()).unwrap();
            worst_d = worst_d.max(((fit.params.tau_d - truth.tau_d) / truth.tau_d).abs());
            worst_r = worst_r.max(((fit.params.tau_r - truth.tau_r) / truth.tau_r).abs());
            sigma_d = sigma_d.max(fit.sigmas.tau_d);
        }
        let ratio = sigma_d / sigma_ref;
        pass &= peak >= 1e3 && worst_d <= 0.02 && worst_r <= 0.02 && (0.2..=5.0).contains(&ratio);
        detail.push(format!(
            "{preset}: peak {peak:.0}, max rel err tau_d {:.2}% tau_r {:.2}%, sigma_fit/sigma_ref {ratio:.2}",
            100.0 * worst_d,
            100.0 * worst_r
        ));
    }
    Outcome::new(pass, detail.join("; "))
}

fn beat_model_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = BeatModelParams {
            g0: rng.gen_range(0.1..5.0),
            tau_x: rng.gen_range(0.5..30.0),
            tau_y: rng.gen_range(0.5..30.0),
            r: rng.gen_range(0.0..3.0),
            phi: rng.gen_range(-PI..PI),
            delta: rng.gen_range(0.1..5.0),
            background: rng.gen_range(0.0..3.0),
            offset: 0.0,
        };
        let dt = rng.gen_range(-20.0..80.0);
        let a = g2_beats(dt, &p);
        worst = worst.max((a - g2_beats_from_amplitudes(dt, &p)).abs() / a.abs().max(1.0));
    }
    let preset = Preset::Fig3;
    let truth = beat_truth(preset);
    let expected = 2.0 * PI / HYPERFINE_BEAT_RAD_PER_NS;
    let mut worst_period: f64 = 0.0;
    for seed in 0..5 {
        let h = simulate_histogram(
            &convolve_jitter(truth, preset.jitter()),
            preset.bin_width(),
            preset.t_range(),
            seed,
        )
        .unwrap();
        let init = BeatModelParams {
            delta: 2.0 * PI * 0.25,
            ..truth
        };
        let fit = fit_beats(
            &h,
            &init,
            &BeatFitOptions {
                free_delta: true,
                ..Default::default()
            },
        )
        .unwrap();
        worst_period = worst_period.max((2.0 * PI / fit.fit.params.delta - expected).abs());
    }
    let pass = worst <= 1e-12 && worst_period <= preset.bin_width();
    Outcome::new(
        pass,
        format!("max scaled |expanded - modulus| = {worst:.1e}; period {expected:.4} ns, max fit deviation {worst_period:.4} ns"),
    )
}

fn beat_regimes() -> Outcome {
    let a = beat_truth(Preset::Fig4a);
    let contrast = 2.0 * a.r / (1.0 + a.r * a.r);
    let cosine = |p: BeatModelParams| 2.0 * p.r * p.phi.cos();
    let (b, c) = (cosine(beat_truth(Preset::Fig4b)), cosine(beat_truth(Preset::Fig4c)));
    let pass = contrast <= 0.06 && b * c < 0.0;
    Outcome::new(
        pass,
        format!("contrast(a) = {contrast:.4}; cosine term at 0+: (b) {b:+.3}, (c) {c:+.3}"),
    )
}

fn pipeline_uncertainties(dir: &Path) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (state, visibility) in [("X", "0.945"), ("Y", "0.973")] {
        let counts = dir.join(format!("counts_{state}.csv"));
        let counts = counts.to_str().unwrap();
        run(&[
            "--seed",
            "11",
            "simulate-tomo",
            "--state",
            state,
            "--visibility",
            visibility,
            "--settings",
            "minimal16",
            "--n",
            "1000",
            "-o",
            counts,
        ]);
        let (doc, _) = run_json(&["--seed", "12", "resample", "-i", counts, "--n-resamples", "200"]);
        let std = |k: &str| doc["result"][k]["std"].as_f64().unwrap();
        let (p, c, e) = (std("purity"), std("concurrence"), std("eof"));
        pass &= [p, c, e].iter().all(|s| (0.0..=0.08).contains(s));
        detail.push(format!("{state}: std P {p:.3}, C {c:.3}, EoF {e:.3}"));
    }
    Outcome::new(pass, detail.join("; "))
}

fn determinism(dir: &Path) -> Outcome {
    let file = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let (counts, hist, fit) = (file("det_counts.csv"), file("det_hist.csv"), file("det_fit.json"));
    let commands: Vec<Vec<&str>> = vec![
        vec!["predict", "--path", "Y"],
        vec!["--seed", "3", "simulate-tomo", "--n", "500", "-o", &counts],
        vec![
            "--seed",
            "3",
            "reconstruct",
            "-i",
            &counts,
            "--resamples",
            "20",
            "--target",
            "X",
        ],
        vec!["--seed", "3", "resample", "-i", &counts, "--n-resamples", "20"],
        vec!["--seed", "3", "simulate-g2", "--preset", "fig3", "-o", &hist],
        vec!["fit-g2", "-i", &hist, "--preset", "fig3", "-o", &fit],
        vec!["beat-params", "--search", "0.5,3.141592653589793"],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let target = args.iter().position(|a| *a == "-o").map(|k| args[k + 1]);
        let capture = || {
            let (stdout, _) = run(args);
            target.map_or(stdout, |p| std::fs::read(p).unwrap())
        };
        if capture() != capture() {
            differing.push(
                args.iter()
                    .find(|a| !a.starts_with('-') && a.parse::<f64>().is_err())
                    .unwrap()
                    .to_string(),
            );
        }
    }
    let detail = if differing.is_empty() {
        format!("{} commands byte-identical on re-run", commands.len())
    } else {
        format!("differing: {}", differing.join(", "))
    };
    Outcome::new(differing.is_empty(), detail)
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("state prediction", Box::new(state_prediction)),
        ("metric identities", Box::new(metric_identities)),
        ("tomography round trip", Box::new(tomography_round_trip)),
        ("estimator agreement", Box::new(estimator_agreement)),
        ("uncertainty scaling", Box::new(uncertainty_scaling)),
        ("decay-fit recovery", Box::new(decay_fit_recovery)),
        ("beat model identity", Box::new(beat_model_identity)),
        ("beat regimes", Box::new(beat_regimes)),
        (
            "pipeline uncertainties",
            Box::new(|| pipeline_uncertainties(dir.path())),
        ),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        failures += usize::from(!outcome.pass);
        println!(
            "{} [{}] {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            k + 1,
            outcome.detail
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
