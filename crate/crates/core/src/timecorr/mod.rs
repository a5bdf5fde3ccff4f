//! Signal–idler coincidence rate as a function of detection delay Δt (ns).
//!
//! Two models are provided: a single decay path with an exponential rise for
//! Δt < 0 and an exponential decay for Δt ≥ 0, and the interference of two
//! decay paths whose photons differ in frequency by `delta`, which produces
//! quantum beats. Both carry a flat accidental background.

pub mod fit;
mod histogram;
mod jitter;
pub mod presets;

pub use fit::{
    fit_beats, fit_beats_values, fit_single, fit_single_values, BeatFitOptions, BeatFitReport, FitReport,
    SingleFitOptions,
};
pub use histogram::{
    bin_average, expected_histogram, read_histogram_csv, simulate_histogram, write_histogram_csv, CoincidenceHistogram,
};
pub use jitter::{convolve_jitter, Jittered};
pub use presets::Preset;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperfine splitting of 5P3/2 F=3 and F=2 as an angular frequency (rad/ns).
pub const HYPERFINE_BEAT_RAD_PER_NS: f64 = 2.0 * PI * 0.266;

/// Anything that can be evaluated as a coincidence rate at a given delay.
pub trait CoincidenceModel: Sync {
    fn value(&self, dt: f64) -> f64;

    /// Delays where the curve is discontinuous or has a kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<M: CoincidenceModel + ?Sized> CoincidenceModel for &M {
    fn value(&self, dt: f64) -> f64 {
        (**self).value(dt)
    }

    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinglePathParams {
    /// Peak coincidences per bin at Δt = 0.
    pub g0: f64,
    /// Rise constant for Δt < 0 (ns).
    pub tau_r: f64,
    /// Decay constant for Δt ≥ 0 (ns).
    pub tau_d: f64,
    pub background: f64,
    /// Shift of the Δt = 0 origin (ns).
    #[serde(default)]
    pub offset: f64,
}

impl SinglePathParams {
    pub fn new(g0: f64, tau_r: f64, tau_d: f64, background: f64) -> Result<Self> {
        let p = Self {
            g0,
            tau_r,
            tau_d,
            background,
            offset: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 > 0.0 && self.tau_r > 0.0 && self.tau_d > 0.0 && self.background >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "single-path parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatModelParams {
    /// Amplitude scale; the X-path peak is `g0²`.
    pub g0: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    /// Y-path amplitude relative to X.
    pub r: f64,
    /// Relative phase (rad).
    pub phi: f64,
    /// Beat angular frequency (rad/ns).
    pub delta: f64,
    pub background: f64,
    #[serde(default)]
    pub offset: f64,
}

impl BeatModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_x > 0.0 && self.tau_y > 0.0 && self.r >= 0.0 && self.delta > 0.0 && self.background >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beat-model parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.delta
    }
}

/// Rise/decay model for a single path.
pub fn g2_single(dt: f64, p: &SinglePathParams) -> f64 {
    let t = dt - p.offset;
    let shape = if t < 0.0 {
        (t / p.tau_r).exp()
    } else {
        (-t / p.tau_d).exp()
    };
    p.g0 * shape + p.background
}

/// Two-path interference in expanded form:
/// `Θ(Δt) G0² [e^{−Δt/τx} + R² e^{−Δt/τy} + 2R e^{−Δt(τx+τy)/(2τxτy)} cos(δΔt + φ)] + background`.
pub fn g2_beats(dt: f64, p: &BeatModelParams) -> f64 {
    let t = dt - p.offset;
    if t < 0.0 {
        return p.background;
    }
    let gx = (-t / p.tau_x).exp();
    let gy = (-t / p.tau_y).exp();
    let cross = (-t * (p.tau_x + p.tau_y) / (2.0 * p.tau_x * p.tau_y)).exp();
    p.g0 * p.g0 * (gx + p.r * p.r * gy + 2.0 * p.r * cross * (p.delta * t + p.phi).cos()) + p.background
}

/// Complex detection amplitudes `(c_X, c_Y)` of the two paths at delay `dt`,
/// with idler carrier angular frequency `carrier` (rad/ns). The Y path is
/// detuned by `delta` and offset in phase by `φ`; the cross term of
/// `|c_X + c_Y|²` is `2R … cos(δΔt + φ)`.
pub fn beat_amplitudes(dt: f64, p: &BeatModelParams, carrier: f64) -> (C64, C64) {
    let t = dt - p.offset;
    if t < 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    let cx = C64::from_polar(p.g0 * (-t / (2.0 * p.tau_x)).exp(), -carrier * t);
    let cy = C64::from_polar(
        p.g0 * p.r * (-t / (2.0 * p.tau_y)).exp(),
        -(carrier + p.delta) * t - p.phi,
    );
    (cx, cy)
}

/// `|c_X + c_Y|² + background` evaluated from the complex amplitudes.
pub fn g2_beats_from_amplitudes(dt: f64, p: &BeatModelParams) -> f64 {
    let (cx, cy) = beat_amplitudes(dt, p, 0.0);
    (cx + cy).norm_sqr() + p.background
}

/// Local fringe visibility of the background-free beat signal at delay `dt`:
/// the cosine-term envelope over the incoherent sum.
pub fn local_visibility(dt: f64, p: &BeatModelParams) -> f64 {
    let t = (dt - p.offset).max(0.0);
    let gx = (-t / p.tau_x).exp();
    let gy = (-t / p.tau_y).exp();
    2.0 * p.r * (gx * gy).sqrt() / (gx + p.r * p.r * gy)
}

/// Either coincidence model, as stored in presets and reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum G2Model {
    Single(SinglePathParams),
    Beats(BeatModelParams),
}

impl CoincidenceModel for SinglePathParams {
    fn value(&self, dt: f64) -> f64 {
        g2_single(dt, self)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.offset]
    }
}

impl CoincidenceModel for BeatModelParams {
    fn value(&self, dt: f64) -> f64 {
        g2_beats(dt, self)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.offset]
    }
}

impl CoincidenceModel for G2Model {
    fn value(&self, dt: f64) -> f64 {
        match self {
            G2Model::Single(p) => p.value(dt),
            G2Model::Beats(p) => p.value(dt),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            G2Model::Single(p) => p.breakpoints(),
            G2Model::Beats(p) => p.breakpoints(),
        }
    }
}
