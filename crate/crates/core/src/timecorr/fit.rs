use serde::{Deserialize, Serialize};

use super::histogram::bin_average;
use super::{g2_beats, BeatModelParams, CoincidenceHistogram, CoincidenceModel, SinglePathParams};
use crate::error::{Error, Result};
use crate::lm::{minimize, LmFailure, LmOptions};
use crate::polstate::fold_phase;

/// Best-fit parameters with 1σ uncertainties (zero for fixed parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub params: P,
    pub sigmas: P,
    pub chi2_reduced: f64,
    pub n_dof: usize,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SingleFitOptions {
    pub fit_offset: bool,
    pub fix_tau_r: bool,
    pub fix_background: bool,
    pub lm: LmOptions,
}

/// Which beat-model parameters are released in addition to the amplitude and
/// background.
#[derive(Clone, Copy, Debug, Default)]
pub struct BeatFitOptions {
    pub free_r: bool,
    pub free_phi: bool,
    pub free_delta: bool,
    pub free_tau_x: bool,
    pub free_tau_y: bool,
    pub fit_offset: bool,
    pub lm: LmOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatFitReport {
    #[serde(flatten)]
    pub fit: FitReport<BeatModelParams>,
    /// The fitted X-path peak `G0²`, which may come out negative on
    /// signal-free data.
    pub amplitude: f64,
    pub amplitude_sigma: f64,
}

/// Histogram values prepared for weighted least squares.
struct Binned<'a> {
    t_start: f64,
    bin_width: f64,
    values: &'a [f64],
}

impl Binned<'_> {
    fn residuals<M: CoincidenceModel>(&self, model: &M) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let m = bin_average(model, self.t_start + k as f64 * self.bin_width, self.bin_width);
                (n - m) / n.max(1.0).sqrt()
            })
            .collect()
    }
}

struct MaskedFit {
    full: Vec<f64>,
    sigmas: Vec<f64>,
    chi2_reduced: f64,
    n_dof: usize,
    iterations: usize,
}

fn fit_masked<M, B>(data: &Binned, full0: &[f64], free: &[bool], build: B, lm: &LmOptions) -> Result<MaskedFit>
where
    M: CoincidenceModel,
    B: Fn(&[f64]) -> Option<M>,
{
    let free_idx: Vec<usize> = (0..full0.len()).filter(|k| free[*k]).collect();
    let n_bins = data.values.len();
    if n_bins <= free_idx.len() {
        return Err(Error::FitDegenerate(format!(
            "{n_bins} bins cannot constrain {} parameters",
            free_idx.len()
        )));
    }
    let expand = |x: &[f64]| -> Vec<f64> {
        let mut full = full0.to_vec();
        for (slot, v) in free_idx.iter().zip(x) {
            full[*slot] = *v;
        }
        full
    };
    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let model = build(&expand(x))?;
        let r = data.residuals(&model);
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let x0: Vec<f64> = free_idx.iter().map(|k| full0[*k]).collect();
    let out = minimize(residuals, &x0, lm).map_err(|e| match e {
        LmFailure::InvalidStart => Error::InvalidParameter("initial parameters are outside the model domain".into()),
        LmFailure::Singular { x, chi2 } => {
            Error::FitDegenerate(format!("singular Jacobian at {:?} (chi2 {chi2:e})", expand(&x)))
        }
    })?;
    if !out.converged {
        return Err(Error::FitNotConverged {
            iterations: out.iterations,
            best: expand(&out.x),
            chi2: out.chi2,
        });
    }
    let mut sigmas = vec![0.0; full0.len()];
    for (j, k) in free_idx.iter().enumerate() {
        sigmas[*k] = out.covariance[(j, j)].sqrt();
    }
    let n_dof = n_bins - free_idx.len();
    Ok(MaskedFit {
        full: expand(&out.x),
        sigmas,
        chi2_reduced: out.chi2 / n_dof as f64,
        n_dof,
        iterations: out.iterations,
    })
}

pub fn fit_single(
    h: &CoincidenceHistogram,
    init: &SinglePathParams,
    opts: &SingleFitOptions,
) -> Result<FitReport<SinglePathParams>> {
    let values: Vec<f64> = h.counts.iter().map(|c| *c as f64).collect();
    fit_single_values(h.bin_width, h.t_start, &values, init, opts)
}

/// Rise/decay fit on real-valued bin contents.
///
/// Poisson-weighted least squares with weights `1/max(n, 1)`; uncertainties
/// come from the inverse curvature matrix without rescaling by χ².
pub fn fit_single_values(
    bin_width: f64,
    t_start: f64,
    values: &[f64],
    init: &SinglePathParams,
    opts: &SingleFitOptions,
) -> Result<FitReport<SinglePathParams>> {
    let t_end = t_start + bin_width * values.len() as f64;
    if !(t_start < init.offset && t_end > init.offset) {
        return Err(Error::InvalidParameter(
            "histogram must cover both sides of Δt = 0".into(),
        ));
    }
    let data = Binned {
        t_start,
        bin_width,
        values,
    };
    let full0 = [init.g0, init.tau_r, init.tau_d, init.background, init.offset];
    let free = [true, !opts.fix_tau_r, true, !opts.fix_background, opts.fit_offset];
    let build = |p: &[f64]| -> Option<SinglePathParams> {
        (p[1] > 0.0 && p[2] > 0.0).then_some(SinglePathParams {
            g0: p[0],
            tau_r: p[1],
            tau_d: p[2],
            background: p[3],
            offset: p[4],
        })
    };
    let fit = fit_masked(&data, &full0, &free, build, &opts.lm)?;
    let pack = |v: &[f64]| SinglePathParams {
        g0: v[0],
        tau_r: v[1],
        tau_d: v[2],
        background: v[3],
        offset: v[4],
    };
    Ok(FitReport {
        params: pack(&fit.full),
        sigmas: pack(&fit.sigmas),
        chi2_reduced: fit.chi2_reduced,
        n_dof: fit.n_dof,
        converged: true,
        iterations: fit.iterations,
    })
}

/// Beat model with the amplitude `G0²` as a free linear coefficient.
struct ScaledBeats {
    amplitude: f64,
    background: f64,
    shape: BeatModelParams,
}

impl CoincidenceModel for ScaledBeats {
    fn value(&self, dt: f64) -> f64 {
        self.amplitude * g2_beats(dt, &self.shape) + self.background
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.shape.offset]
    }
}

/// Fits the two-path interference model.
///
/// By default only the amplitude and the accidental background are free and
/// the time constants, `R`, `φ` and `δ` stay at the values in `fixed`;
/// `opts` can release any of them.
pub fn fit_beats(h: &CoincidenceHistogram, fixed: &BeatModelParams, opts: &BeatFitOptions) -> Result<BeatFitReport> {
    let values: Vec<f64> = h.counts.iter().map(|c| *c as f64).collect();
    fit_beats_values(h.bin_width, h.t_start, &values, fixed, opts)
}

pub fn fit_beats_values(
    bin_width: f64,
    t_start: f64,
    values: &[f64],
    fixed: &BeatModelParams,
    opts: &BeatFitOptions,
) -> Result<BeatFitReport> {
    let t_end = t_start + bin_width * values.len() as f64;
    if t_end - t_start.max(fixed.offset) < 3.0 * fixed.period() {
        return Err(Error::InvalidParameter(
            "histogram must span at least three beat periods after Δt = 0".into(),
        ));
    }
    let data = Binned {
        t_start,
        bin_width,
        values,
    };
    let full0 = [
        fixed.g0 * fixed.g0,
        fixed.background,
        fixed.tau_x,
        fixed.tau_y,
        fixed.r,
        fixed.phi,
        fixed.delta,
        fixed.offset,
    ];
    let free = [
        true,
        true,
        opts.free_tau_x,
        opts.free_tau_y,
        opts.free_r,
        opts.free_phi,
        opts.free_delta,
        opts.fit_offset,
    ];
    let build = |p: &[f64]| -> Option<ScaledBeats> {
        (p[2] > 0.0 && p[3] > 0.0 && p[6] > 0.0).then_some(ScaledBeats {
            amplitude: p[0],
            background: p[1],
            shape: BeatModelParams {
                g0: 1.0,
                tau_x: p[2],
                tau_y: p[3],
                r: p[4],
                phi: p[5],
                delta: p[6],
                background: 0.0,
                offset: p[7],
            },
        })
    };
    let fit = fit_masked(&data, &full0, &free, build, &opts.lm)?;
    let v = &fit.full;
    let s = &fit.sigmas;
    let (amp, amp_sigma) = (v[0], s[0]);
    let (g0, g0_sigma) = if amp > 0.0 {
        (amp.sqrt(), amp_sigma / (2.0 * amp.sqrt()))
    } else {
        (0.0, amp_sigma.sqrt())
    };
    // a negative R is the same curve with φ shifted by π
    let (r, phi) = if v[4] < 0.0 {
        (-v[4], fold_phase(v[5] + std::f64::consts::PI))
    } else {
        (v[4], fold_phase(v[5]))
    };
    let params = BeatModelParams {
        g0,
        tau_x: v[2],
        tau_y: v[3],
        r,
        phi,
        delta: v[6],
        background: v[1],
        offset: v[7],
    };
    let sigmas = BeatModelParams {
        g0: g0_sigma,
        tau_x: s[2],
        tau_y: s[3],
        r: s[4],
        phi: s[5],
        delta: s[6],
        background: s[1],
        offset: s[7],
    };
    Ok(BeatFitReport {
        fit: FitReport {
            params,
            sigmas,
            chi2_reduced: fit.chi2_reduced,
            n_dof: fit.n_dof,
            converged: true,
            iterations: fit.iterations,
        },
        amplitude: amp,
        amplitude_sigma: amp_sigma,
    })
}
