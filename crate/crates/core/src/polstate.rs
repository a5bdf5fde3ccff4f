//! Two-photon polarization states.
//!
//! Kets and density matrices carry a basis tag. In the circular basis the
//! amplitude order is (LL, LR, RL, RR); in the linear basis it is
//! (HH, HV, VH, VV). The first factor is always the signal photon. Circular
//! states are defined as `L = (H + iV)/√2`, `R = (H − iV)/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::angmom::{path_coupling_x, CascadeLevels, Helicity};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Circular,
    Linear,
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circular" | "lr" => Ok(Basis::Circular),
            "linear" | "hv" => Ok(Basis::Linear),
            other => Err(Error::UnknownBasis(other.to_string())),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Circular => write!(f, "circular"),
            Basis::Linear => write!(f, "linear"),
        }
    }
}

/// Single-photon change of basis taking circular amplitudes (c_L, c_R) to
/// linear amplitudes (c_H, c_V).
fn circ_to_lin_1() -> Matrix2<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    Matrix2::new(s, s, i, -i)
}

fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Two-photon unitary taking `from` amplitudes to `to` amplitudes.
fn basis_unitary(from: Basis, to: Basis) -> Matrix4<C64> {
    let u = kron2(&circ_to_lin_1(), &circ_to_lin_1());
    match (from, to) {
        (Basis::Circular, Basis::Linear) => u,
        (Basis::Linear, Basis::Circular) => u.adjoint(),
        _ => Matrix4::identity(),
    }
}

/// A single-photon polarization analyzer setting, stored in the (H, V) basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub c_h: C64,
    pub c_v: C64,
}

impl Projector {
    /// Requires `|c_h|² + |c_v|² = 1` to within 1e-12.
    pub fn new(c_h: C64, c_v: C64) -> Result<Self> {
        let n = c_h.norm_sqr() + c_v.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedProjector(n));
        }
        Ok(Self { c_h, c_v })
    }

    /// Rescales to unit norm.
    pub fn normalized(c_h: C64, c_v: C64) -> Result<Self> {
        let n = (c_h.norm_sqr() + c_v.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            c_h: c_h / n,
            c_v: c_v / n,
        })
    }

    /// Point on the Poincaré sphere: `cos(θ/2) H + e^{iϕ} sin(θ/2) V`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            c_h: C64::new((theta / 2.0).cos(), 0.0),
            c_v: C64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    pub fn h() -> Self {
        Self {
            c_h: C64::new(1.0, 0.0),
            c_v: C64::new(0.0, 0.0),
        }
    }

    pub fn v() -> Self {
        Self {
            c_h: C64::new(0.0, 0.0),
            c_v: C64::new(1.0, 0.0),
        }
    }

    pub fn d() -> Self {
        Self {
            c_h: C64::new(FRAC_1_SQRT_2, 0.0),
            c_v: C64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn a() -> Self {
        Self {
            c_h: C64::new(FRAC_1_SQRT_2, 0.0),
            c_v: C64::new(-FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn l() -> Self {
        Self {
            c_h: C64::new(FRAC_1_SQRT_2, 0.0),
            c_v: C64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    pub fn r() -> Self {
        Self {
            c_h: C64::new(FRAC_1_SQRT_2, 0.0),
            c_v: C64::new(0.0, -FRAC_1_SQRT_2),
        }
    }

    /// Named analyzer: one of H, V, D, A, L, R.
    pub fn named(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "H" => Some(Self::h()),
            "V" => Some(Self::v()),
            "D" => Some(Self::d()),
            "A" => Some(Self::a()),
            "L" => Some(Self::l()),
            "R" => Some(Self::r()),
            _ => None,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_h.norm_sqr() + self.c_v.norm_sqr()
    }
}

/// Linear-basis two-photon vector `p_s ⊗ p_i`.
pub(crate) fn product_vector(ps: &Projector, pi: &Projector) -> Vector4<C64> {
    Vector4::new(ps.c_h * pi.c_h, ps.c_h * pi.c_v, ps.c_v * pi.c_h, ps.c_v * pi.c_v)
}

/// A pure two-photon polarization state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiphotonKet {
    pub basis: Basis,
    pub amplitudes: [C64; 4],
}

impl BiphotonKet {
    pub fn new(basis: Basis, amplitudes: [C64; 4]) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedKet(n));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn normalized(basis: Basis, amplitudes: [C64; 4]) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            basis,
            amplitudes: amplitudes.map(|a| a / n),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn as_vector(&self) -> Vector4<C64> {
        Vector4::from(self.amplitudes)
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let p = C64::from_polar(1.0, theta);
        Self {
            basis: self.basis,
            amplitudes: self.amplitudes.map(|a| a * p),
        }
    }

    /// |⟨self|other⟩|², basis-aligned.
    pub fn overlap_sqr(&self, other: &BiphotonKet) -> f64 {
        let o = change_basis(other, self.basis);
        self.as_vector().dotc(&o.as_vector()).norm_sqr()
    }
}

/// Expresses a ket in `target` basis. Identity when the tag already matches.
pub fn change_basis(k: &BiphotonKet, target: Basis) -> BiphotonKet {
    if k.basis == target {
        return *k;
    }
    let v = basis_unitary(k.basis, target) * k.as_vector();
    BiphotonKet {
        basis: target,
        amplitudes: [v[0], v[1], v[2], v[3]],
    }
}

/// A two-photon density matrix: Hermitian with unit trace. Positivity is
/// checked by [`DensityMatrix4::new`]; reconstructions that may carry small
/// negative eigenvalues use [`DensityMatrix4::new_unchecked_positivity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityMatrixRepr", try_from = "DensityMatrixRepr")]
pub struct DensityMatrix4 {
    basis: Basis,
    matrix: Matrix4<C64>,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    basis: Basis,
    matrix: [[C64; 4]; 4],
}

impl From<DensityMatrix4> for DensityMatrixRepr {
    fn from(rho: DensityMatrix4) -> Self {
        let m = &rho.matrix;
        Self {
            basis: rho.basis,
            matrix: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        }
    }
}

impl TryFrom<DensityMatrixRepr> for DensityMatrix4 {
    type Error = Error;

    fn try_from(repr: DensityMatrixRepr) -> Result<Self> {
        DensityMatrix4::new(repr.basis, Matrix4::from_fn(|r, c| repr.matrix[r][c]))
    }
}

pub const MIN_EIGENVALUE_TOL: f64 = -1e-9;

impl DensityMatrix4 {
    pub fn new(basis: Basis, matrix: Matrix4<C64>) -> Result<Self> {
        let rho = Self::new_unchecked_positivity(basis, matrix)?;
        let min = rho.min_eigenvalue();
        if min < MIN_EIGENVALUE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("smallest eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// Checks hermiticity and trace only.
    pub fn new_unchecked_positivity(basis: Basis, matrix: Matrix4<C64>) -> Result<Self> {
        let herm = (matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        // symmetrize away rounding dust
        let matrix = (matrix + matrix.adjoint()).scale(0.5);
        Ok(Self { basis, matrix })
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        Self {
            basis,
            matrix: Matrix4::identity().scale(0.25),
        }
    }

    /// Convex mixture `p·self + (1−p)·other`.
    pub fn mix(&self, other: &DensityMatrix4, p: f64) -> Self {
        let o = other.to_basis(self.basis);
        Self {
            basis: self.basis,
            matrix: self.matrix.scale(p) + o.matrix.scale(1.0 - p),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.matrix
    }

    pub fn to_basis(&self, target: Basis) -> Self {
        if self.basis == target {
            return self.clone();
        }
        let u = basis_unitary(self.basis, target);
        Self {
            basis: target,
            matrix: u * self.matrix * u.adjoint(),
        }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = SymmetricEigen::new(self.matrix);
        let mut ev = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Closest positive semidefinite unit-trace matrix (eigenvalue clipping).
    pub fn project_physical(&self) -> Self {
        let eig = SymmetricEigen::new(self.matrix);
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let total: f64 = clipped.iter().sum();
        let d = Matrix4::from_diagonal(&clipped.map(|l| C64::new(l / total, 0.0)));
        let v = eig.eigenvectors;
        let m = v * d * v.adjoint();
        Self {
            basis: self.basis,
            matrix: (m + m.adjoint()).scale(0.5),
        }
    }

    /// `⟨v|ρ|v⟩` for a vector expressed in the matrix's own basis.
    pub(crate) fn expectation(&self, v: &Vector4<C64>) -> f64 {
        v.dotc(&(self.matrix * v)).re
    }

    /// Probability of a joint detection behind analyzers `ps ⊗ pi`.
    pub fn projection_probability(&self, ps: &Projector, pi: &Projector) -> f64 {
        let lin = self.to_basis(Basis::Linear);
        lin.expectation(&product_vector(ps, pi)).max(0.0)
    }
}

/// Outer product `|k⟩⟨k|`.
pub fn density_from_ket(k: &BiphotonKet) -> DensityMatrix4 {
    let v = k.as_vector();
    DensityMatrix4 {
        basis: k.basis,
        matrix: v * v.adjoint(),
    }
}

/// Amplitudes of `a0|LR⟩ + e^{iφ0} a1|RL⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAmplitudes {
    pub a0: f64,
    pub a1: f64,
    pub phi0: f64,
}

impl PathAmplitudes {
    pub fn new(a0: f64, a1: f64, phi0: f64) -> Result<Self> {
        if a0 < 0.0 || a1 < 0.0 || ((a0 * a0 + a1 * a1) - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedKet(a0 * a0 + a1 * a1));
        }
        Ok(Self {
            a0,
            a1,
            phi0: fold_phase(phi0),
        })
    }
}

/// Folds an angle into (−π, π].
pub fn fold_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    // rem_euclid maps −π to π already; exact −π never survives
    p
}

/// Predicts the biphoton state produced through one decay path.
///
/// The |LR⟩ amplitude comes from the channel with both helicity labels `+1`
/// and the |RL⟩ amplitude from the channel with both `−1`; the two are
/// normalized together and their relative sign becomes `φ0 ∈ {0, π}`.
pub fn predict_path_state(levels: &CascadeLevels) -> Result<PathAmplitudes> {
    levels.validate()?;
    let x_lr = path_coupling_x(levels, Helicity::Plus, Helicity::Plus);
    let x_rl = path_coupling_x(levels, Helicity::Minus, Helicity::Minus);
    amplitudes_from_couplings(x_lr, x_rl)
}

/// Normalizes the two channel couplings into path amplitudes.
pub fn amplitudes_from_couplings(x_lr: f64, x_rl: f64) -> Result<PathAmplitudes> {
    let norm = x_lr.hypot(x_rl);
    if norm < 1e-300 || !norm.is_finite() {
        return Err(Error::DegenerateState);
    }
    let phi0 = if x_lr * x_rl < 0.0 { PI } else { 0.0 };
    Ok(PathAmplitudes {
        a0: x_lr.abs() / norm,
        a1: x_rl.abs() / norm,
        phi0,
    })
}

/// `a0|LR⟩ + e^{iφ0} a1|RL⟩` in the circular basis.
pub fn ket_from_path(p: &PathAmplitudes) -> BiphotonKet {
    let zero = C64::new(0.0, 0.0);
    BiphotonKet {
        basis: Basis::Circular,
        amplitudes: [zero, C64::new(p.a0, 0.0), C64::from_polar(p.a1, p.phi0), zero],
    }
}

/// `⟨p_s ⊗ p_i | k⟩`.
pub fn joint_projection_amplitude(k: &BiphotonKet, proj_s: &Projector, proj_i: &Projector) -> C64 {
    let lin = change_basis(k, Basis::Linear);
    product_vector(proj_s, proj_i).dotc(&lin.as_vector())
}

/// Relative amplitude `R` and phase `φ` of the Y path against the X path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatParams {
    pub r: f64,
    pub phi: f64,
}

const SUPPRESSION_TOL: f64 = 1e-12;

/// `R = |A_Y/A_X|`, `φ = arg(A_Y/A_X)` for joint projection amplitudes `A`.
pub fn beat_params(
    ket_x: &BiphotonKet,
    ket_y: &BiphotonKet,
    proj_s: &Projector,
    proj_i: &Projector,
) -> Result<BeatParams> {
    let ax = joint_projection_amplitude(ket_x, proj_s, proj_i);
    let ay = joint_projection_amplitude(ket_y, proj_s, proj_i);
    if ax.norm() < SUPPRESSION_TOL {
        return Err(Error::SuppressedReferencePath);
    }
    if ay.norm() < SUPPRESSION_TOL {
        return Ok(BeatParams { r: 0.0, phi: 0.0 });
    }
    let q = ay / ax;
    Ok(BeatParams {
        r: q.norm(),
        phi: fold_phase(q.arg()),
    })
}

/// Outcome of searching analyzer settings for a target `(R, φ)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProjectorSearch {
    pub proj_s: Projector,
    pub proj_i: Projector,
    pub achieved: BeatParams,
    /// `|A_Y/A_X − R e^{iφ}|` at the best setting found.
    pub residual: f64,
    pub attainable: bool,
}

/// Searches the product of two Poincaré spheres for analyzer settings that
/// realize the target `(R, φ)` between two path states.
///
/// A coarse grid seeds a compass search over the four sphere angles. The
/// target counts as attainable when the complex residual drops below `tol`.
pub fn search_projectors(ket_x: &BiphotonKet, ket_y: &BiphotonKet, target: BeatParams, tol: f64) -> ProjectorSearch {
    let goal = C64::from_polar(target.r, target.phi);
    let cost = |a: &[f64; 4]| -> f64 {
        let ps = Projector::from_angles(a[0], a[1]);
        let pi = Projector::from_angles(a[2], a[3]);
        let ax = joint_projection_amplitude(ket_x, &ps, &pi);
        if ax.norm() < 1e-9 {
            return f64::INFINITY;
        }
        let ay = joint_projection_amplitude(ket_y, &ps, &pi);
        (ay / ax - goal).norm()
    };

    let n_theta = 13;
    let n_phi = 16;
    let mut best = [0.0; 4];
    let mut best_cost = f64::INFINITY;
    let thetas: Vec<f64> = (0..n_theta).map(|k| PI * k as f64 / (n_theta - 1) as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    for &ts in &thetas {
        for &fs in &phis {
            for &ti in &thetas {
                for &fi in &phis {
                    let a = [ts, fs, ti, fi];
                    let c = cost(&a);
                    if c < best_cost {
                        best_cost = c;
                        best = a;
                    }
                }
            }
        }
    }

    let mut step = PI / (n_theta - 1) as f64;
    while step > 1e-12 && best_cost > tol * 1e-3 {
        let mut improved = false;
        for k in 0..4 {
            for dir in [1.0, -1.0] {
                let mut trial = best;
                trial[k] += dir * step;
                let c = cost(&trial);
                if c < best_cost {
                    best_cost = c;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let proj_s = Projector::from_angles(best[0], best[1]);
    let proj_i = Projector::from_angles(best[2], best[3]);
    let achieved = beat_params(ket_x, ket_y, &proj_s, &proj_i).unwrap_or(BeatParams {
        r: f64::NAN,
        phi: f64::NAN,
    });
    ProjectorSearch {
        proj_s,
        proj_i,
        achieved,
        residual: best_cost,
        attainable: best_cost < tol,
    }
}
