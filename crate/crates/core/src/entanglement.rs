//! Entanglement indicators for two-qubit polarization states.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::polstate::{change_basis, Basis, BiphotonKet, DensityMatrix4};

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix4) -> f64 {
    let m = rho.matrix();
    // Tr[ρ²] = Σ |ρ_ij|² for Hermitian ρ
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `σ_y ⊗ σ_y` in the (H, V) basis.
fn spin_flip() -> Matrix4<C64> {
    let z = C64::new(0.0, 0.0);
    let p = C64::new(1.0, 0.0);
    // σ_y ⊗ σ_y = antidiag(−1, 1, 1, −1)
    Matrix4::new(z, z, z, -p, z, z, p, z, z, p, z, z, -p, z, z, z)
}

/// Wootters concurrence, `max(0, λ1 − λ2 − λ3 − λ4)`.
///
/// The λ are the decreasing square roots of the eigenvalues of
/// `√ρ ρ̃ √ρ`, with `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)` formed in the linear basis.
/// Writing `ρ = V V†` with `V = U √P` from the eigendecomposition, that
/// matrix is unitarily equivalent to `τ τ†` for `τ = V† (σ_y⊗σ_y) V*`, so the
/// λ are taken directly as the singular values of `τ`. Negative eigenvalue
/// dust is clamped to zero first.
pub fn concurrence(rho: &DensityMatrix4) -> f64 {
    let lin = rho.to_basis(Basis::Linear);
    let eig = SymmetricEigen::new(*lin.matrix());
    let scale = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    let v = eig.eigenvectors * scale;
    let tau = v.adjoint() * spin_flip() * v.map(|z| z.conj());
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}

/// Binary entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Entanglement of formation from a concurrence value.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

pub fn entanglement_of_formation(rho: &DensityMatrix4) -> f64 {
    eof_from_concurrence(concurrence(rho))
}

/// `⟨ψ|ρ|ψ⟩` for a pure target.
pub fn fidelity(rho: &DensityMatrix4, target: &BiphotonKet) -> f64 {
    let t = change_basis(target, rho.basis());
    let v = t.as_vector();
    v.dotc(&(rho.matrix() * v)).re
}

/// `½ Σ |eig(ρ − σ)|`.
pub fn trace_distance(a: &DensityMatrix4, b: &DensityMatrix4) -> f64 {
    let b = b.to_basis(a.basis());
    let diff = a.matrix() - b.matrix();
    let diff = (diff + diff.adjoint()).scale(0.5);
    0.5 * SymmetricEigen::new(diff)
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

/// Scalar indicators of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub purity: f64,
    pub concurrence: f64,
    pub eof: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
}

impl MetricReport {
    pub fn evaluate(rho: &DensityMatrix4, target: Option<&BiphotonKet>) -> Self {
        let c = concurrence(rho);
        Self {
            purity: purity(rho),
            concurrence: c,
            eof: eof_from_concurrence(c),
            fidelity: target.map(|t| fidelity(rho, t)),
        }
    }
}
