use std::path::Path;

use anyhow::{bail, Context, Result};
use biphoton_core::angmom::{path_coupling_x, Helicity};
use biphoton_core::entanglement::MetricReport;
use biphoton_core::polstate::{
    beat_params as beat_ratio, change_basis, density_from_ket, joint_projection_amplitude, predict_path_state,
    search_projectors, Basis, BeatParams, BiphotonKet, DensityMatrix4, PathAmplitudes, ProjectorSearch,
};
use biphoton_core::timecorr::{
    bin_average, convolve_jitter, fit_beats, fit_single, read_histogram_csv, simulate_histogram, write_histogram_csv,
    BeatFitOptions, BeatModelParams, CoincidenceHistogram, CoincidenceModel, G2Model, Preset, SingleFitOptions,
    SinglePathParams, HYPERFINE_BEAT_RAD_PER_NS,
};
use biphoton_core::tomography::{
    read_counts_csv, reconstruct_linear, reconstruct_mle, resample_uncertainties, simulate_counts, standard_settings,
    subtract_background, write_counts_csv, CountsRecord, SettingsKind,
};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::output::{Metadata, Sink};
use crate::parse;
use crate::{
    BeatOverrides, BeatParamsArgs, CountsInput, FitG2Args, Method, ModelKind, PredictArgs, ReconstructArgs,
    ResampleArgs, SettingsArg, SimulateG2Args, SimulateTomoArgs,
};

#[derive(Serialize)]
struct Levels {
    f_ground: f64,
    f_pump: f64,
    f_excited: f64,
    f_decay: f64,
}

#[derive(Serialize)]
struct Couplings {
    x_lr: f64,
    x_rl: f64,
}

#[derive(Serialize)]
struct Prediction {
    levels: Levels,
    couplings: Couplings,
    amplitudes: PathAmplitudes,
    ket_circular: BiphotonKet,
    ket_linear: BiphotonKet,
    metrics: MetricReport,
}

pub fn predict(seed: u64, args: PredictArgs) -> Result<()> {
    let meta = Metadata::new(seed);
    let levels = match (&args.path, &args.levels) {
        (Some(p), _) => parse::path_levels(p)?,
        (None, Some(l)) => parse::levels(l)?,
        (None, None) => bail!("either --path or --levels is required"),
    };
    let amplitudes = predict_path_state(&levels)?;
    let ket = biphoton_core::polstate::ket_from_path(&amplitudes);
    let half = |x: u32| x as f64 / 2.0;
    let prediction = Prediction {
        levels: Levels {
            f_ground: half(levels.two_f_ground),
            f_pump: half(levels.two_f_pump),
            f_excited: half(levels.two_f_excited),
            f_decay: half(levels.two_f_decay),
        },
        couplings: Couplings {
            x_lr: path_coupling_x(&levels, Helicity::Plus, Helicity::Plus),
            x_rl: path_coupling_x(&levels, Helicity::Minus, Helicity::Minus),
        },
        amplitudes,
        ket_circular: ket,
        ket_linear: change_basis(&ket, Basis::Linear),
        metrics: MetricReport::evaluate(&density_from_ket(&ket), None),
    };
    Sink(args.out.output).write_json(&meta, &prediction)
}

pub fn simulate_tomo(seed: u64, args: SimulateTomoArgs) -> Result<()> {
    let mut meta = Metadata::new(seed);
    if !(0.0..=1.0).contains(&args.visibility) {
        bail!("--visibility must lie in [0, 1]");
    }
    if !(args.n > 0.0 && args.n.is_finite()) {
        bail!("--n must be positive");
    }
    let state = parse::state(&args.state, &mut meta)?;
    let rho = state.density();
    let rho = rho.mix(&DensityMatrix4::maximally_mixed(rho.basis()), args.visibility);
    let kind = match args.settings {
        SettingsArg::Minimal16 => SettingsKind::Minimal16,
        SettingsArg::Overcomplete36 => SettingsKind::Overcomplete36,
    };
    let records = simulate_counts(&rho, &standard_settings(kind), args.n, seed);
    let extra = [
        ("state", args.state.clone()),
        ("visibility", args.visibility.to_string()),
        ("n_per_setting", args.n.to_string()),
    ];
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, &records, &meta.csv_lines(&extra))?;
    Sink(args.out.output).write_bytes(&buf)
}

fn load_counts(counts: &CountsInput, meta: &mut Metadata) -> Result<(Vec<CountsRecord>, Option<BiphotonKet>)> {
    let bytes = meta.read_input(&counts.input)?;
    let records = read_counts_csv(bytes.as_slice()).with_context(|| format!("in `{}`", counts.input.display()))?;
    if records.is_empty() {
        bail!("`{}` contains no measurement records", counts.input.display());
    }
    if !(counts.background >= 0.0) {
        bail!("--background must be non-negative");
    }
    let records = if counts.background > 0.0 {
        subtract_background(&records, counts.background)
    } else {
        records
    };
    let target = counts.target.as_deref().map(|t| parse::ket(t, meta)).transpose()?;
    Ok((records, target))
}

#[derive(Serialize)]
struct Reconstruction<T: Serialize> {
    method: &'static str,
    #[serde(flatten)]
    estimate: T,
}

#[derive(Serialize)]
struct LinearEstimate {
    rho: DensityMatrix4,
    min_eigenvalue: f64,
    unphysical: bool,
    metrics: MetricReport,
}

pub fn reconstruct(seed: u64, args: ReconstructArgs) -> Result<()> {
    let mut meta = Metadata::new(seed);
    let (records, target) = load_counts(&args.counts, &mut meta)?;
    let sink = Sink(args.out.output);
    match args.method {
        Method::Linear => {
            if args.resamples > 0 {
                bail!("--resamples requires --method mle");
            }
            let lin = reconstruct_linear(&records)?;
            let estimate = LinearEstimate {
                metrics: MetricReport::evaluate(&lin.rho, target.as_ref()),
                rho: lin.rho,
                min_eigenvalue: lin.min_eigenvalue,
                unphysical: lin.unphysical,
            };
            sink.write_json(
                &meta,
                &Reconstruction {
                    method: "linear",
                    estimate,
                },
            )
        }
        Method::Mle => {
            let mut result = reconstruct_mle(&records)?;
            result.metrics = MetricReport::evaluate(&result.rho, target.as_ref());
            if args.resamples > 0 {
                result.resampled_metrics =
                    Some(resample_uncertainties(&records, args.resamples, seed, target.as_ref())?);
            }
            sink.write_json(
                &meta,
                &Reconstruction {
                    method: "mle",
                    estimate: result,
                },
            )
        }
    }
}

pub fn resample(seed: u64, args: ResampleArgs) -> Result<()> {
    let mut meta = Metadata::new(seed);
    let (records, target) = load_counts(&args.counts, &mut meta)?;
    let metrics = resample_uncertainties(&records, args.n_resamples, seed, target.as_ref())?;
    Sink(args.out.output).write_json(&meta, &metrics)
}

fn apply_overrides(mut p: BeatModelParams, o: &BeatOverrides) -> BeatModelParams {
    p.tau_x = o.tau_x.unwrap_or(p.tau_x);
    p.tau_y = o.tau_y.unwrap_or(p.tau_y);
    p.r = o.r.unwrap_or(p.r);
    p.phi = o.phi.unwrap_or(p.phi);
    p.delta = o.delta.unwrap_or(p.delta);
    p
}

fn has_overrides(o: &BeatOverrides) -> bool {
    o.tau_x.is_some() || o.tau_y.is_some() || o.r.is_some() || o.phi.is_some() || o.delta.is_some()
}

pub fn simulate_g2(seed: u64, args: SimulateG2Args) -> Result<()> {
    let mut meta = Metadata::new(seed);
    let preset: Option<Preset> = args.preset.as_deref().map(str::parse).transpose()?;
    let model = match (&preset, &args.model) {
        (Some(p), _) => p.model(),
        (None, Some(path)) => {
            let bytes = meta.read_input(path)?;
            serde_json::from_slice::<G2Model>(&bytes)
                .with_context(|| format!("`{}` is not a model JSON", path.display()))?
        }
        (None, None) => bail!("either --preset or --model is required"),
    };
    let model = match model {
        G2Model::Beats(p) => G2Model::Beats(apply_overrides(p, &args.beat)),
        G2Model::Single(_) if has_overrides(&args.beat) => bail!("beat parameters do not apply to a single-path model"),
        single => single,
    };
    match model {
        G2Model::Single(p) => p.validate()?,
        G2Model::Beats(p) => p.validate()?,
    }
    let (default_width, default_range, default_jitter) = match (&preset, &model) {
        (Some(p), _) => (p.bin_width(), p.t_range(), p.jitter()),
        (None, G2Model::Single(_)) => (1.0, (-30.0, 60.0), 0.0),
        (None, G2Model::Beats(_)) => (0.1, (-10.0, 50.0), 0.0),
    };
    let width = args.bin_width.unwrap_or(default_width);
    let range = (
        args.t_start.unwrap_or(default_range.0),
        args.t_end.unwrap_or(default_range.1),
    );
    let jitter = args.jitter.unwrap_or(default_jitter);
    if !(jitter >= 0.0) {
        bail!("--jitter must be non-negative");
    }
    let h = simulate_histogram(&convolve_jitter(model, jitter), width, range, seed)?;
    let mut extra = vec![
        ("model", serde_json::to_string(&model)?),
        ("jitter_ns", jitter.to_string()),
    ];
    if let Some(p) = preset {
        extra.push(("preset", p.to_string()));
    }
    let mut buf = Vec::new();
    write_histogram_csv(&mut buf, &h, &meta.csv_lines(&extra))?;
    Sink(args.out.output).write_bytes(&buf)
}

/// Mean level of the bins ending at least 3 ns before Δt = 0, if there are
/// enough of them.
fn leading_background(h: &CoincidenceHistogram) -> f64 {
    let early: Vec<f64> = (0..h.len())
        .filter(|k| h.bin_start(*k) + h.bin_width <= -3.0)
        .map(|k| h.counts[k] as f64)
        .collect();
    if early.len() >= 3 {
        early.iter().sum::<f64>() / early.len() as f64
    } else {
        h.counts.iter().copied().min().unwrap_or(0) as f64
    }
}

fn single_start(h: &CoincidenceHistogram) -> SinglePathParams {
    let bg = leading_background(h).max(0.1);
    let (peak_k, peak) = h
        .counts
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .map(|(k, c)| (k, *c as f64))
        .unwrap_or((0, 1.0));
    let g0 = (peak - bg).max(1.0);
    let tau_d = (peak_k..h.len())
        .find(|k| (h.counts[*k] as f64 - bg) < g0 / std::f64::consts::E)
        .map(|k| (h.bin_center(k) - h.bin_center(peak_k)).max(h.bin_width))
        .unwrap_or(5.0);
    SinglePathParams {
        g0,
        tau_r: 2.0,
        tau_d,
        background: bg,
        offset: 0.0,
    }
}

#[derive(Serialize)]
struct FitOutput<T: Serialize> {
    model: &'static str,
    #[serde(flatten)]
    report: T,
}

fn write_curve<M: CoincidenceModel>(path: &Path, h: &CoincidenceHistogram, model: &M, meta: &Metadata) -> Result<()> {
    let mut text = String::new();
    for (k, v) in meta.csv_lines(&[]) {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    text.push_str("bin_start_ns,counts,model\n");
    for (k, c) in h.counts.iter().enumerate() {
        let start = h.bin_start(k);
        text.push_str(&format!(
            "{},{},{}\n",
            (start * 1e9).round() / 1e9,
            c,
            bin_average(model, start, h.bin_width)
        ));
    }
    std::fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display()))
}

pub fn fit_g2(seed: u64, args: FitG2Args) -> Result<()> {
    let mut meta = Metadata::new(seed);
    let bytes = meta.read_input(&args.input)?;
    let h = read_histogram_csv(bytes.as_slice()).with_context(|| format!("in `{}`", args.input.display()))?;
    let preset: Option<Preset> = args.preset.as_deref().map(str::parse).transpose()?;
    let preset_model = preset.map(|p| p.model());
    let kind = args.model.unwrap_or(match preset_model {
        Some(G2Model::Beats(_)) => ModelKind::Beats,
        _ => ModelKind::Single,
    });
    let sink = Sink(args.out.output.clone());
    match kind {
        ModelKind::Single => {
            if has_overrides(&args.beat) {
                bail!("beat parameters do not apply to a single-path fit");
            }
            let opts = SingleFitOptions {
                fit_offset: args.fit_offset,
                fix_tau_r: args.fix_tau_r,
                ..Default::default()
            };
            let report = fit_single(&h, &single_start(&h), &opts)?;
            if let Some(path) = &args.curve {
                write_curve(path, &h, &report.params, &meta)?;
            }
            sink.write_json(
                &meta,
                &FitOutput {
                    model: "single",
                    report,
                },
            )
        }
        ModelKind::Beats => {
            let base = match preset_model {
                Some(G2Model::Beats(p)) => p,
                _ => {
                    let (Some(_), Some(_)) = (args.beat.r, args.beat.phi) else {
                        bail!("a beat fit needs --preset or both --r and --phi");
                    };
                    BeatModelParams {
                        g0: 1.0,
                        tau_x: 5.6,
                        tau_y: 13.1,
                        r: 0.0,
                        phi: 0.0,
                        delta: HYPERFINE_BEAT_RAD_PER_NS,
                        background: 0.0,
                        offset: 0.0,
                    }
                }
            };
            let mut fixed = apply_overrides(base, &args.beat);
            fixed.validate()?;
            fixed.background = leading_background(&h).max(0.1);
            let peak = h.counts.iter().copied().max().unwrap_or(0) as f64;
            let shape_at_zero = (1.0 + fixed.r * fixed.r + 2.0 * fixed.r * fixed.phi.cos()).max(0.1);
            fixed.g0 = ((peak - fixed.background).max(1.0) / shape_at_zero).sqrt();
            let opts = BeatFitOptions {
                free_r: args.free_r,
                free_phi: args.free_phi,
                free_delta: args.free_delta,
                free_tau_x: args.free_tau_x,
                free_tau_y: args.free_tau_y,
                fit_offset: args.fit_offset,
                ..Default::default()
            };
            let report = fit_beats(&h, &fixed, &opts)?;
            if let Some(path) = &args.curve {
                let mut curve = report.fit.params;
                curve.g0 = 1.0;
                let scaled = ScaledCurve {
                    amplitude: report.amplitude,
                    shape: curve,
                };
                write_curve(path, &h, &scaled, &meta)?;
            }
            sink.write_json(&meta, &FitOutput { model: "beats", report })
        }
    }
}

/// Fitted beat curve with a possibly negative amplitude.
struct ScaledCurve {
    amplitude: f64,
    shape: BeatModelParams,
}

impl CoincidenceModel for ScaledCurve {
    fn value(&self, dt: f64) -> f64 {
        let background = self.shape.background;
        self.amplitude * (self.shape.value(dt) - background) + background
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.shape.offset]
    }
}

#[derive(Serialize)]
struct BeatReport {
    amplitude_x: C64,
    amplitude_y: C64,
    #[serde(flatten)]
    params: BeatParams,
    /// Fringe visibility at Δt = 0⁺, `2R/(1 + R²)`.
    visibility_at_zero: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum BeatOutput {
    Direct(BeatReport),
    Search(ProjectorSearch),
}

pub fn beat_params(seed: u64, args: BeatParamsArgs) -> Result<()> {
    let mut meta = Metadata::new(seed);
    let kx = parse::ket(&args.ket_x, &mut meta)?;
    let ky = parse::ket(&args.ket_y, &mut meta)?;
    let out = if let Some(search) = &args.search {
        let (r, phi) = parse::ratio_phase(search)?;
        if !(r >= 0.0) {
            bail!("target R must be non-negative");
        }
        BeatOutput::Search(search_projectors(&kx, &ky, BeatParams { r, phi }, args.tol))
    } else {
        let (Some(s), Some(i)) = (&args.proj_s, &args.proj_i) else {
            bail!("--proj-s and --proj-i are required without --search");
        };
        let (ps, pi) = (parse::projector(s)?, parse::projector(i)?);
        let params = beat_ratio(&kx, &ky, &ps, &pi)?;
        BeatOutput::Direct(BeatReport {
            amplitude_x: joint_projection_amplitude(&kx, &ps, &pi),
            amplitude_y: joint_projection_amplitude(&ky, &ps, &pi),
            visibility_at_zero: 2.0 * params.r / (1.0 + params.r * params.r),
            params,
        })
    };
    Sink(args.out.output).write_json(&meta, &out)
}
