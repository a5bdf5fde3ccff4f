use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BeatModelParams, G2Model, SinglePathParams, HYPERFINE_BEAT_RAD_PER_NS};
use crate::angmom::CascadeLevels;
use crate::error::{Error, Result};
use crate::polstate::{beat_params, ket_from_path, predict_path_state, Projector};

/// Synthetic stand-ins for the measured coincidence histograms.
///
/// `fig2x`/`fig2y` are the single-path decays (rise 3.1/3.3 ns, decay
/// 5.6/13.1 ns, 1 ns bins). `fig3` and `fig4a/b/c` are two-path beat curves
/// (τ_X = 5.6 ns, τ_Y = 13.1 ns, δ = 2π·266 MHz) sampled in 0.1 ns bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2x,
    Fig2y,
    Fig3,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig2x" => Ok(Self::Fig2x),
            "fig2y" => Ok(Self::Fig2y),
            "fig3" => Ok(Self::Fig3),
            "fig4a" => Ok(Self::Fig4a),
            "fig4b" => Ok(Self::Fig4b),
            "fig4c" => Ok(Self::Fig4c),
            other => Err(Error::InvalidParameter(format!("unknown preset `{other}`"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Fig2x => "fig2x",
            Self::Fig2y => "fig2y",
            Self::Fig3 => "fig3",
            Self::Fig4a => "fig4a",
            Self::Fig4b => "fig4b",
            Self::Fig4c => "fig4c",
        };
        f.write_str(name)
    }
}

const BEAT_G0: f64 = 20.0;
const BEAT_BACKGROUND: f64 = 1.0;

fn beats(r: f64, phi: f64) -> BeatModelParams {
    BeatModelParams {
        g0: BEAT_G0,
        tau_x: 5.6,
        tau_y: 13.1,
        r,
        phi,
        delta: HYPERFINE_BEAT_RAD_PER_NS,
        background: BEAT_BACKGROUND,
        offset: 0.0,
    }
}

/// `(R, φ)` for the predicted path states behind a signal `L` analyzer and
/// the idler analyzer `(0.7 + 0.57i)H + 0.41i V`.
pub fn fig3_beat_params() -> (f64, f64) {
    let kx = ket_from_path(&predict_path_state(&CascadeLevels::PATH_X).expect("path X"));
    let ky = ket_from_path(&predict_path_state(&CascadeLevels::PATH_Y).expect("path Y"));
    let idler = Projector::normalized(
        num_complex::Complex64::new(0.7, 0.57),
        num_complex::Complex64::new(0.0, 0.41),
    )
    .expect("nonzero");
    let bp = beat_params(&kx, &ky, &Projector::l(), &idler).expect("X path not suppressed");
    (bp.r, bp.phi)
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Self::Fig2x,
        Self::Fig2y,
        Self::Fig3,
        Self::Fig4a,
        Self::Fig4b,
        Self::Fig4c,
    ];

    pub fn model(&self) -> G2Model {
        match self {
            Self::Fig2x => G2Model::Single(SinglePathParams {
                g0: 4000.0,
                tau_r: 3.1,
                tau_d: 5.6,
                background: 2.0,
                offset: 0.0,
            }),
            Self::Fig2y => G2Model::Single(SinglePathParams {
                g0: 4000.0,
                tau_r: 3.3,
                tau_d: 13.1,
                background: 2.0,
                offset: 0.0,
            }),
            Self::Fig3 => {
                let (r, phi) = fig3_beat_params();
                G2Model::Beats(beats(r, phi))
            }
            Self::Fig4a => G2Model::Beats(beats(2.86e-2, PI)),
            Self::Fig4b => G2Model::Beats(beats(1.43, 0.0)),
            Self::Fig4c => G2Model::Beats(beats(0.5, PI)),
        }
    }

    pub fn bin_width(&self) -> f64 {
        match self {
            Self::Fig2x | Self::Fig2y => 1.0,
            _ => 0.1,
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        match self {
            Self::Fig2x => (-30.0, 60.0),
            Self::Fig2y => (-30.0, 120.0),
            _ => (-10.0, 50.0),
        }
    }

    /// Detector timing jitter (ns) applied when simulating.
    pub fn jitter(&self) -> f64 {
        match self {
            Self::Fig2x | Self::Fig2y => 0.0,
            _ => 0.04,
        }
    }
}
