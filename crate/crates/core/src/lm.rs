//! Levenberg-Marquardt least squares on weighted residual vectors.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers χ² by less than this fraction.
    pub ftol: f64,
    /// Stop when every parameter moves by less than this relative amount.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-13,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub chi2: f64,
    /// `(JᵀJ)⁻¹` at the solution.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub enum LmFailure {
    /// The starting point is outside the model's domain.
    InvalidStart,
    /// `JᵀJ` cannot be inverted at the solution.
    Singular { x: Vec<f64>, chi2: f64 },
}

fn chi2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian, falling back to one-sided differences at a
/// domain boundary.
fn jacobian<F>(f: &F, x: &[f64], r0: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-2);
        xp[k] = x[k] + h;
        let up = f(&xp);
        xp[k] = x[k] - h;
        let down = f(&xp);
        xp[k] = x[k];
        match (up, down) {
            (Some(u), Some(d)) => {
                for i in 0..m {
                    j[(i, k)] = (u[i] - d[i]) / (2.0 * h);
                }
            }
            (Some(u), None) => {
                for i in 0..m {
                    j[(i, k)] = (u[i] - r0[i]) / h;
                }
            }
            (None, Some(d)) => {
                for i in 0..m {
                    j[(i, k)] = (r0[i] - d[i]) / h;
                }
            }
            (None, None) => return None,
        }
    }
    Some(j)
}

/// Smallest over largest eigenvalue of the diagonally rescaled matrix.
fn reciprocal_condition(a: &DMatrix<f64>) -> f64 {
    let d: Vec<f64> = (0..a.nrows())
        .map(|k| a[(k, k)].max(f64::MIN_POSITIVE).sqrt())
        .collect();
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] / (d[r] * d[c]));
    let ev = scaled.symmetric_eigenvalues();
    let max = ev.max();
    if max <= 0.0 {
        return 0.0;
    }
    ev.min().max(0.0) / max
}

/// Minimizes `Σ r_i(x)²`. The residual function returns `None` outside the
/// model's domain; such trial steps are rejected like uphill ones.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome, LmFailure>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x).ok_or(LmFailure::InvalidStart)?;
    let mut cost = chi2(&r);
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    let mut converged = n == 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let Some(j) = jacobian(&f, &x, &r) else {
            return Err(LmFailure::Singular { x, chi2: cost });
        };
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * DVector::from_column_slice(&r);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match f(&trial) {
                Some(rt) if chi2(&rt) <= cost => {
                    let new_cost = chi2(&rt);
                    let small_step = step
                        .iter()
                        .zip(&x)
                        .all(|(s, xv)| s.abs() <= opts.xtol * (xv.abs() + opts.xtol));
                    let small_gain = cost - new_cost <= opts.ftol * cost;
                    x = trial;
                    r = rt;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    converged = small_step || small_gain;
                    accepted = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: at the minimum to rounding
            converged = true;
        }
    }

    let j = jacobian(&f, &x, &r).ok_or(LmFailure::Singular {
        x: x.clone(),
        chi2: cost,
    })?;
    let jtj = j.transpose() * &j;
    if n > 0 && reciprocal_condition(&jtj) < 1e-13 {
        return Err(LmFailure::Singular { x, chi2: cost });
    }
    let covariance = jtj
        .clone()
        .try_inverse()
        .filter(|c| (0..n).all(|k| c[(k, k)].is_finite() && c[(k, k)] >= 0.0))
        .ok_or(LmFailure::Singular {
            x: x.clone(),
            chi2: cost,
        })?;
    Ok(LmOutcome {
        x,
        chi2: cost,
        covariance,
        iterations,
        converged,
    })
}
