//! Two-photon polarization tomography: simulated coincidence counts, linear
//! inversion, and Poisson maximum-likelihood reconstruction.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::MetricReport;
use crate::error::{Error, Result};
use crate::polstate::{product_vector, Basis, BiphotonKet, DensityMatrix4, Projector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub proj_s: Projector,
    pub proj_i: Projector,
    pub label: String,
}

impl MeasurementSetting {
    pub fn named(signal: &str, idler: &str) -> Option<Self> {
        Some(Self {
            proj_s: Projector::named(signal)?,
            proj_i: Projector::named(idler)?,
            label: format!("{}{}", signal.to_ascii_uppercase(), idler.to_ascii_uppercase()),
        })
    }

    fn vector(&self) -> Vector4<C64> {
        product_vector(&self.proj_s, &self.proj_i)
    }
}

/// Coincidences observed behind one analyzer setting. Counts are stored as
/// reals; expectation-valued and background-subtracted records share
/// the type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub setting: MeasurementSetting,
    pub counts: f64,
    pub exposure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingsKind {
    Minimal16,
    Overcomplete36,
}

impl std::str::FromStr for SettingsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal16" => Ok(Self::Minimal16),
            "overcomplete36" => Ok(Self::Overcomplete36),
            other => Err(Error::InvalidParameter(format!("unknown settings kind `{other}`"))),
        }
    }
}

const MINIMAL16: [(&str, &str); 16] = [
    ("H", "H"),
    ("H", "V"),
    ("V", "V"),
    ("V", "H"),
    ("R", "H"),
    ("R", "V"),
    ("D", "V"),
    ("D", "H"),
    ("D", "R"),
    ("D", "D"),
    ("R", "D"),
    ("H", "D"),
    ("V", "D"),
    ("V", "L"),
    ("H", "L"),
    ("R", "L"),
];

pub fn standard_settings(kind: SettingsKind) -> Vec<MeasurementSetting> {
    match kind {
        SettingsKind::Minimal16 => MINIMAL16
            .iter()
            .map(|(s, i)| MeasurementSetting::named(s, i).expect("named analyzer"))
            .collect(),
        SettingsKind::Overcomplete36 => {
            let names = ["H", "V", "D", "A", "L", "R"];
            names
                .iter()
                .flat_map(|s| {
                    names
                        .iter()
                        .map(move |i| MeasurementSetting::named(s, i).expect("named analyzer"))
                })
                .collect()
        }
    }
}

/// Detection probability for one setting.
pub fn setting_probability(rho: &DensityMatrix4, setting: &MeasurementSetting) -> f64 {
    rho.projection_probability(&setting.proj_s, &setting.proj_i)
}

/// Noiseless records: counts equal to `n_per_setting · p`.
pub fn expected_records(
    rho: &DensityMatrix4,
    settings: &[MeasurementSetting],
    n_per_setting: f64,
) -> Vec<CountsRecord> {
    settings
        .iter()
        .map(|s| CountsRecord {
            setting: s.clone(),
            counts: n_per_setting * setting_probability(rho, s),
            exposure: 1.0,
        })
        .collect()
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn poisson_draw<R: rand::Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 || !mean.is_finite() {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

/// Poisson counts `~ Poisson(n · p · exposure)` for every setting. Setting `k`
/// draws from its own stream of the seeded generator.
pub fn simulate_counts(
    rho: &DensityMatrix4,
    settings: &[MeasurementSetting],
    n_per_setting: f64,
    seed: u64,
) -> Vec<CountsRecord> {
    settings
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut rng = stream_rng(seed, k as u64);
            let mean = n_per_setting * setting_probability(rho, s);
            CountsRecord {
                setting: s.clone(),
                counts: poisson_draw(mean, &mut rng),
                exposure: 1.0,
            }
        })
        .collect()
}

/// Subtracts a flat accidental level from every record, clamped at zero.
pub fn subtract_background(records: &[CountsRecord], background: f64) -> Vec<CountsRecord> {
    records
        .iter()
        .map(|r| CountsRecord {
            counts: (r.counts - background * r.exposure).max(0.0),
            ..r.clone()
        })
        .collect()
}

fn validate_records(records: &[CountsRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::DegenerateData("no counts records".into()));
    }
    let mut total = 0.0;
    for (k, r) in records.iter().enumerate() {
        if !(r.counts >= 0.0 && r.counts.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "record {k}: counts {} must be non-negative",
                r.counts
            )));
        }
        if !(r.exposure > 0.0 && r.exposure.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "record {k}: exposure {} must be positive",
                r.exposure
            )));
        }
        total += r.counts;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateData("all counts are zero".into()));
    }
    Ok(total)
}

fn pauli(k: usize) -> Matrix2<C64> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match k {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

/// The 16 operators `σ_a ⊗ σ_b` in the linear basis.
fn pauli_products() -> Vec<Matrix4<C64>> {
    (0..16)
        .map(|k| {
            let (a, b) = (pauli(k / 4), pauli(k % 4));
            Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
        })
        .collect()
}

/// Linear-inversion estimate. The matrix is Hermitian with unit trace but may
/// have negative eigenvalues from noise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearReconstruction {
    pub rho: DensityMatrix4,
    pub min_eigenvalue: f64,
    /// `true` when the smallest eigenvalue is below −1e-9.
    pub unphysical: bool,
}

const SPAN_RTOL: f64 = 1e-10;

/// Least-squares inversion of rates `counts / exposure` onto the Pauli
/// product expansion of an unnormalized state, followed by trace
/// normalization.
pub fn reconstruct_linear(records: &[CountsRecord]) -> Result<LinearReconstruction> {
    validate_records(records)?;
    let basis = pauli_products();
    let design = DMatrix::from_fn(records.len(), 16, |row, col| {
        let v = records[row].setting.vector();
        v.dotc(&(basis[col] * v)).re
    });
    let rates = DVector::from_iterator(records.len(), records.iter().map(|r| r.counts / r.exposure));

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > SPAN_RTOL * smax).count();
    if rank < 16 {
        return Err(Error::InsufficientSpan { rank });
    }
    let coeffs = svd
        .solve(&rates, SPAN_RTOL * smax)
        .map_err(|e| Error::DegenerateData(e.to_string()))?;

    let mut m = Matrix4::<C64>::zeros();
    for (k, b) in basis.iter().enumerate() {
        m += b.scale(coeffs[k]);
    }
    let tr = m.trace().re;
    if tr <= 0.0 {
        return Err(Error::DegenerateData(format!(
            "reconstructed trace {tr} is not positive"
        )));
    }
    let m = m.unscale(tr);
    let m = (m + m.adjoint()).scale(0.5);
    let rho = DensityMatrix4::new_unchecked_positivity(Basis::Linear, m)?;
    let min_eigenvalue = rho.min_eigenvalue();
    Ok(LinearReconstruction {
        rho,
        min_eigenvalue,
        unphysical: min_eigenvalue < crate::polstate::MIN_EIGENVALUE_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampledMetrics {
    pub n_resamples: usize,
    pub purity: MeanStd,
    pub concurrence: MeanStd,
    pub eof: MeanStd,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<MeanStd>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyResult {
    pub rho: DensityMatrix4,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resampled_metrics: Option<ResampledMetrics>,
}

/// Poisson log-likelihood of `rho` with the intensity scale profiled out:
/// `Σ n ln μ − μ` with `μ = N e p` and `N = Σn / Σ e p`.
pub fn log_likelihood(rho: &DensityMatrix4, records: &[CountsRecord]) -> f64 {
    let probs: Vec<f64> = records.iter().map(|r| setting_probability(rho, &r.setting)).collect();
    let total: f64 = records.iter().map(|r| r.counts).sum();
    let weight: f64 = records.iter().zip(&probs).map(|(r, p)| r.exposure * p).sum();
    let scale = total / weight;
    records
        .iter()
        .zip(&probs)
        .map(|(r, p)| {
            let mu = scale * r.exposure * p;
            if r.counts > 0.0 {
                r.counts * mu.ln() - mu
            } else {
                -mu
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
        }
    }
}

/// Lower-triangular `T` with real diagonal from 16 real parameters: the
/// diagonal first, then (re, im) of the entries below it row by row.
fn t_from_params(t: &[f64; 16]) -> Matrix4<C64> {
    let mut m = Matrix4::<C64>::zeros();
    for i in 0..4 {
        m[(i, i)] = C64::new(t[i], 0.0);
    }
    for (k, (r, c)) in OFF_DIAG.iter().enumerate() {
        m[(*r, *c)] = C64::new(t[4 + 2 * k], t[5 + 2 * k]);
    }
    m
}

const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// Parameters of `T` with `T†T = ρ`, from a positive definite `ρ`.
fn params_from_rho(rho: &Matrix4<C64>) -> Option<[f64; 16]> {
    // Cholesky of the index-reversed matrix gives ρ = J L L† J, so
    // T = J L† J is lower triangular with T†T = ρ.
    let rev = Matrix4::from_fn(|r, c| rho[(3 - r, 3 - c)]);
    let l = rev.cholesky()?.l();
    let lt = l.adjoint();
    let t = Matrix4::from_fn(|r, c| lt[(3 - r, 3 - c)]);
    let mut p = [0.0; 16];
    for i in 0..4 {
        p[i] = t[(i, i)].re;
    }
    for (k, (r, c)) in OFF_DIAG.iter().enumerate() {
        p[4 + 2 * k] = t[(*r, *c)].re;
        p[5 + 2 * k] = t[(*r, *c)].im;
    }
    Some(p)
}

struct Likelihood<'a> {
    vectors: Vec<Vector4<C64>>,
    records: &'a [CountsRecord],
    scale: f64,
    total: f64,
}

impl Likelihood<'_> {
    /// Normalized negative log-likelihood and its gradient.
    fn eval(&self, p: &[f64; 16], grad: Option<&mut [f64; 16]>) -> f64 {
        let t = t_from_params(p);
        let mut f = 0.0;
        let mut g = [0.0; 16];
        let want_grad = grad.is_some();
        for (v, r) in self.vectors.iter().zip(self.records) {
            let tv = t * v;
            let mu = self.scale * r.exposure * tv.norm_squared();
            if r.counts > 0.0 {
                if mu <= 0.0 {
                    return f64::INFINITY;
                }
                f -= r.counts * mu.ln() - mu;
            } else {
                f += mu;
            }
            if want_grad {
                // d f / d μ
                let w = if r.counts > 0.0 { 1.0 - r.counts / mu } else { 1.0 };
                let w = w * self.scale * r.exposure * 2.0 / self.total;
                for i in 0..4 {
                    g[i] += w * (v[i].conj() * tv[i]).re;
                }
                for (k, (row, col)) in OFF_DIAG.iter().enumerate() {
                    let z = v[*col].conj() * tv[*row];
                    g[4 + 2 * k] += w * z.re;
                    g[5 + 2 * k] += w * z.im;
                }
            }
        }
        if let Some(out) = grad {
            *out = g;
        }
        f / self.total
    }
}

fn max_abs(v: &[f64; 16]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64; 16], b: &[f64; 16]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn reconstruct_mle(records: &[CountsRecord]) -> Result<TomographyResult> {
    reconstruct_mle_with(records, &MleOptions::default())
}

/// Maximum-likelihood reconstruction over `ρ = T†T / Tr[T†T]`.
///
/// BFGS on the Poisson likelihood, started from the physical projection of
/// the linear-inversion estimate. Converged when the gradient max-norm drops
/// below `gradient_tol` or the parameter step below `step_tol`.
pub fn reconstruct_mle_with(records: &[CountsRecord], opts: &MleOptions) -> Result<TomographyResult> {
    let total = validate_records(records)?;
    let linear = reconstruct_linear(records)?;

    const SEED_MIX: f64 = 1e-4;
    let seed_rho = linear
        .rho
        .project_physical()
        .mix(&DensityMatrix4::maximally_mixed(Basis::Linear), 1.0 - SEED_MIX);
    let weight: f64 = records
        .iter()
        .map(|r| r.exposure * setting_probability(&seed_rho, &r.setting))
        .sum();
    let model = Likelihood {
        vectors: records.iter().map(|r| r.setting.vector()).collect(),
        records,
        scale: total / weight,
        total,
    };
    let mut x = params_from_rho(seed_rho.matrix())
        .ok_or_else(|| Error::DegenerateData("seed state is not positive definite".into()))?;

    let mut g = [0.0; 16];
    let mut f = model.eval(&x, Some(&mut g));
    if !f.is_finite() {
        return Err(Error::DegenerateData(
            "likelihood is not finite at the starting point".into(),
        ));
    }
    let mut h = identity16();
    let mut converged = max_abs(&g) < opts.gradient_tol;
    let mut iterations = 0;
    let mut fresh_h = true;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut d = mat_vec(&h, &g).map(|z| -z);
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            h = identity16();
            fresh_h = true;
            d = g.map(|z| -z);
            slope = dot(&d, &g);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let trial: [f64; 16] = std::array::from_fn(|k| x[k] + alpha * d[k]);
            let mut gt = [0.0; 16];
            let ft = model.eval(&trial, Some(&mut gt));
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn)) = accepted else {
            if fresh_h {
                // no descent even along the gradient: stalled at rounding level
                converged = true;
                break;
            }
            h = identity16();
            fresh_h = true;
            continue;
        };

        let s: [f64; 16] = std::array::from_fn(|k| xn[k] - x[k]);
        let y: [f64; 16] = std::array::from_fn(|k| gn[k] - g[k]);
        x = xn;
        f = fn_;
        g = gn;

        if max_abs(&g) < opts.gradient_tol || max_abs(&s) < opts.step_tol {
            converged = true;
            break;
        }

        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if fresh_h {
                let scale = sy / dot(&y, &y);
                for v in h.iter_mut() {
                    v.iter_mut().for_each(|e| *e *= scale);
                }
                fresh_h = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
    }

    let t = t_from_params(&x);
    let m = t.adjoint() * t;
    let m = m.unscale(m.trace().re);
    let m = (m + m.adjoint()).scale(0.5);
    let rho = DensityMatrix4::new_unchecked_positivity(Basis::Linear, m)?;
    let result = TomographyResult {
        log_likelihood: log_likelihood(&rho, records),
        metrics: MetricReport::evaluate(&rho, None),
        rho,
        iterations,
        converged,
        resampled_metrics: None,
    };
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            best: Box::new(result),
        });
    }
    Ok(result)
}

type Mat16 = [[f64; 16]; 16];

fn identity16() -> Mat16 {
    let mut h = [[0.0; 16]; 16];
    for (k, row) in h.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    h
}

fn mat_vec(h: &Mat16, v: &[f64; 16]) -> [f64; 16] {
    std::array::from_fn(|r| dot(&h[r], v))
}

/// Inverse-Hessian BFGS update.
fn bfgs_update(h: &mut Mat16, s: &[f64; 16], y: &[f64; 16], sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for r in 0..16 {
        for c in 0..16 {
            h[r][c] += (1.0 + rho * yhy) * rho * s[r] * s[c] - rho * (hy[r] * s[c] + s[r] * hy[c]);
        }
    }
}

/// Parametric bootstrap: each resample redraws every count from
/// `Poisson(observed)` on its own generator stream and is reconstructed by
/// maximum likelihood.
pub fn resample_uncertainties(
    records: &[CountsRecord],
    n_resamples: usize,
    seed: u64,
    target: Option<&BiphotonKet>,
) -> Result<ResampledMetrics> {
    if n_resamples < 2 {
        return Err(Error::InvalidParameter("at least two resamples are required".into()));
    }
    let rngs = (0..n_resamples).map(|k| stream_rng(seed, k as u64)).collect();
    resample_impl(records, rngs, target)
}

/// Bootstrap with one explicit seed per resample.
pub fn resample_with_seeds(
    records: &[CountsRecord],
    seeds: &[u64],
    target: Option<&BiphotonKet>,
) -> Result<ResampledMetrics> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter("at least two resamples are required".into()));
    }
    let rngs = seeds.iter().map(|s| stream_rng(*s, 0)).collect();
    resample_impl(records, rngs, target)
}

fn resample_impl(
    records: &[CountsRecord],
    rngs: Vec<ChaCha8Rng>,
    target: Option<&BiphotonKet>,
) -> Result<ResampledMetrics> {
    validate_records(records)?;
    let reports: Vec<MetricReport> = rngs
        .into_par_iter()
        .map(|mut rng| {
            let redrawn: Vec<CountsRecord> = records
                .iter()
                .map(|r| CountsRecord {
                    counts: poisson_draw(r.counts, &mut rng),
                    ..r.clone()
                })
                .collect();
            reconstruct_mle(&redrawn).map(|res| MetricReport::evaluate(&res.rho, target))
        })
        .collect::<Result<_>>()?;

    let column = |f: &dyn Fn(&MetricReport) -> f64| MeanStd::from_samples(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(ResampledMetrics {
        n_resamples: reports.len(),
        purity: column(&|m| m.purity),
        concurrence: column(&|m| m.concurrence),
        eof: column(&|m| m.eof),
        fidelity: target.map(|_| column(&|m| m.fidelity.unwrap_or(f64::NAN))),
    })
}

pub const COUNTS_HEADER: [&str; 11] = [
    "label",
    "proj_s_h_re",
    "proj_s_h_im",
    "proj_s_v_re",
    "proj_s_v_im",
    "proj_i_h_re",
    "proj_i_h_im",
    "proj_i_v_re",
    "proj_i_v_im",
    "counts",
    "exposure",
];

/// Writes a counts CSV, preceded by `# key: value` metadata lines.
pub fn write_counts_csv<W: Write>(mut w: W, records: &[CountsRecord], metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COUNTS_HEADER)?;
    for r in records {
        let (s, i) = (&r.setting.proj_s, &r.setting.proj_i);
        let nums = [
            s.c_h.re, s.c_h.im, s.c_v.re, s.c_v.im, i.c_h.re, i.c_h.im, i.c_v.re, i.c_v.im, r.counts, r.exposure,
        ];
        let mut row = vec![r.setting.label.clone()];
        row.extend(nums.iter().map(|x| x.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a counts CSV. `#` lines are skipped; an absent `exposure` value
/// defaults to 1.
pub fn read_counts_csv<R: Read>(r: R) -> Result<Vec<CountsRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    let line0 = rdr.position().line();
    if header.iter().collect::<Vec<_>>() != COUNTS_HEADER {
        return Err(Error::Parse {
            line: line0.max(1),
            field: "header".into(),
            message: format!("expected `{}`", COUNTS_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |k: usize| -> Result<f64> {
            let field = COUNTS_HEADER[k];
            let text = row.get(k).unwrap_or("");
            if k == 10 && text.is_empty() {
                return Ok(1.0);
            }
            text.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    field: field.into(),
                    message: format!("`{text}` is not a number"),
                })
        };
        let projector = |k: usize, field: &str| -> Result<Projector> {
            let ch = C64::new(num(k)?, num(k + 1)?);
            let cv = C64::new(num(k + 2)?, num(k + 3)?);
            let n = ch.norm_sqr() + cv.norm_sqr();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::Parse {
                    line,
                    field: field.into(),
                    message: format!("projector norm² {n} is not 1"),
                });
            }
            Projector::normalized(ch, cv)
        };
        let counts = num(9)?;
        if counts < 0.0 {
            return Err(Error::Parse {
                line,
                field: "counts".into(),
                message: "counts must be non-negative".into(),
            });
        }
        let exposure = num(10)?;
        if exposure <= 0.0 {
            return Err(Error::Parse {
                line,
                field: "exposure".into(),
                message: "exposure must be positive".into(),
            });
        }
        records.push(CountsRecord {
            setting: MeasurementSetting {
                label: row.get(0).unwrap_or("").to_string(),
                proj_s: projector(1, "proj_s")?,
                proj_i: projector(5, "proj_i")?,
            },
            counts,
            exposure,
        });
    }
    Ok(records)
}
