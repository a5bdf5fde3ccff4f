//! Angular momentum coupling for the hyperfine cascade.
//!
//! Angular momenta are stored doubled (`two_j`, `two_m`), keeping half-integer
//! values stay exact. Clebsch-Gordan coefficients are evaluated with the Racah
//! closed-form sum in exact rational arithmetic; only the final square root is
//! taken in floating point. Phases follow the Condon-Shortley convention.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An angular momentum `|j m⟩`, doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngularMomentum {
    two_j: u32,
    two_m: i32,
}

impl AngularMomentum {
    pub fn new(two_j: u32, two_m: i32) -> Result<Self> {
        if two_m.unsigned_abs() > two_j || (two_j as i64 - two_m as i64) % 2 != 0 {
            return Err(Error::AngularMomentum { two_j, two_m });
        }
        Ok(Self { two_j, two_m })
    }

    /// Integer `j` and `m`.
    pub fn integer(j: u32, m: i32) -> Result<Self> {
        Self::new(2 * j, 2 * m)
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn two_m(&self) -> i32 {
        self.two_m
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.two_m as f64 / 2.0
    }
}

/// `⟨j1 m1; j2 m2 | J M⟩`.
///
/// Returns 0 when `m1 + m2 != M` or the triangle rule fails.
pub fn clebsch_gordan(j1: AngularMomentum, j2: AngularMomentum, total: AngularMomentum) -> f64 {
    cg_doubled(j1.two_j, j1.two_m, j2.two_j, j2.two_m, total.two_j, total.two_m)
}

/// Clebsch-Gordan coefficient on raw doubled quantum numbers. Any invalid
/// combination (|m| > j, parity mismatch, triangle violation, m1 + m2 != M)
/// yields exactly 0.
pub(crate) fn cg_doubled(tj1: u32, tm1: i32, tj2: u32, tm2: i32, tj: u32, tm: i32) -> f64 {
    let (j1, m1, j2, m2, j, m) = (tj1 as i64, tm1 as i64, tj2 as i64, tm2 as i64, tj as i64, tm as i64);
    let valid = |jj: i64, mm: i64| mm.abs() <= jj && (jj - mm) % 2 == 0;
    if !valid(j1, m1) || !valid(j2, m2) || !valid(j, m) || m1 + m2 != m {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    match cg_squared_signed(j1, m1, j2, m2, j, m) {
        None => 0.0,
        Some((sign, sq)) => sign * ratio_to_f64(&sq).sqrt(),
    }
}

/// Exact `sign · CG²` from the Racah formula; all arguments doubled.
fn cg_squared_signed(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> Option<(f64, BigRational)> {
    // every combination below is even by the parity/triangle checks
    let h = |x: i64| -> i64 { x / 2 };
    let prefactor = BigRational::new(
        BigInt::from(j + 1)
            * factorial(h(j + j1 - j2))
            * factorial(h(j - j1 + j2))
            * factorial(h(j1 + j2 - j))
            * factorial(h(j + m))
            * factorial(h(j - m))
            * factorial(h(j1 - m1))
            * factorial(h(j1 + m1))
            * factorial(h(j2 - m2))
            * factorial(h(j2 + m2)),
        factorial(h(j1 + j2 + j) + 1),
    );

    let k_min = 0.max(h(j2 - j - m1)).max(h(j1 + m2 - j));
    let k_max = h(j1 + j2 - j).min(h(j1 - m1)).min(h(j2 + m2));
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(h(j1 + j2 - j) - k)
            * factorial(h(j1 - m1) - k)
            * factorial(h(j2 + m2) - k)
            * factorial(h(j - j2 + m1) + k)
            * factorial(h(j - j1 - m2) + k);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return None;
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    Some((sign, &sum * &sum * prefactor))
}

fn factorial(n: i64) -> BigInt {
    debug_assert!(n >= 0);
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// Converts a positive rational to f64 without overflowing on large factorials.
fn ratio_to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    let shift = n.bits().max(d.bits()).saturating_sub(900) as usize;
    let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Photon helicity `α = ±1` as labelled in the cascade coupling sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub fn sign(self) -> i32 {
        match self {
            Helicity::Plus => 1,
            Helicity::Minus => -1,
        }
    }
}

/// Hyperfine quantum numbers of the four levels in the cascade
/// ground → pump intermediate → excited → decay intermediate → ground.
/// All values are doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CascadeLevels {
    pub two_f_ground: u32,
    pub two_f_pump: u32,
    pub two_f_excited: u32,
    pub two_f_decay: u32,
}

impl CascadeLevels {
    /// 5S1/2 F=2 → 5P1/2 F=2 → 5D3/2 F=3 → 5P3/2 F=3 → 5S1/2 F=2.
    pub const PATH_X: Self = Self::from_doubled_unchecked(4, 4, 6, 6);
    /// Same cascade decaying through 5P3/2 F=2.
    pub const PATH_Y: Self = Self::from_doubled_unchecked(4, 4, 6, 4);

    const fn from_doubled_unchecked(g: u32, b: u32, e: u32, d: u32) -> Self {
        Self {
            two_f_ground: g,
            two_f_pump: b,
            two_f_excited: e,
            two_f_decay: d,
        }
    }

    pub fn from_doubled(g: u32, b: u32, e: u32, d: u32) -> Result<Self> {
        let levels = Self::from_doubled_unchecked(g, b, e, d);
        levels.validate()?;
        Ok(levels)
    }

    /// Integer F values, e.g. `(2, 2, 3, 3)` for path X.
    pub fn from_f(g: u32, b: u32, e: u32, d: u32) -> Result<Self> {
        Self::from_doubled(2 * g, 2 * b, 2 * e, 2 * d)
    }

    /// Each link of the chain must be a dipole (photon j = 1) transition.
    pub fn validate(&self) -> Result<()> {
        let links = [
            ("ground-pump", self.two_f_ground, self.two_f_pump),
            ("pump-excited", self.two_f_pump, self.two_f_excited),
            ("excited-decay", self.two_f_excited, self.two_f_decay),
            ("decay-ground", self.two_f_decay, self.two_f_ground),
        ];
        for (name, a, b) in links {
            let (a, b) = (a as i64, b as i64);
            if (a - b).abs() > 2 || a + b < 2 || (a + b) % 2 != 0 {
                return Err(Error::Levels(format!(
                    "{name} link F={}→F={} is not a dipole transition",
                    a as f64 / 2.0,
                    b as f64 / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Sum over ground sublevels of the four-coefficient product coupling the
/// cascade for signal helicity `alpha_s` and idler helicity `alpha_i`.
///
/// The pumps drive Δm = −1 then Δm = +1, so the excited sublevel equals the
/// starting ground sublevel `m`. The signal takes the atom to the decay level
/// at `m − α_S`, and the idler must leave from that same sublevel
/// (`m − α_I`) for the atom to return to `m`; otherwise the term vanishes.
pub fn path_coupling_x(levels: &CascadeLevels, alpha_s: Helicity, alpha_i: Helicity) -> f64 {
    let (g, b, e, d) = (
        levels.two_f_ground,
        levels.two_f_pump,
        levels.two_f_excited,
        levels.two_f_decay,
    );
    let (a_s, a_i) = (2 * alpha_s.sign(), 2 * alpha_i.sign());
    if a_s != a_i {
        return 0.0;
    }
    let g = g as i32;
    (-g..=g)
        .step_by(2)
        .map(|m| {
            cg_doubled(g as u32, m, 2, -2, b, m - 2)
                * cg_doubled(b, m - 2, 2, 2, e, m)
                * cg_doubled(d, m - a_s, 2, a_s, e, m)
                * cg_doubled(g as u32, m, 2, -a_i, d, m - a_i)
        })
        .sum()
}
