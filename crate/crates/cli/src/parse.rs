use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use biphoton_core::angmom::CascadeLevels;
use biphoton_core::polstate::{
    density_from_ket, ket_from_path, predict_path_state, BiphotonKet, DensityMatrix4, Projector,
};
use num_complex::Complex64 as C64;

use crate::output::Metadata;

/// Parses `g,b,e,d` hyperfine quantum numbers (integers or half-integers).
pub fn levels(text: &str) -> Result<CascadeLevels> {
    let doubled: Vec<u32> = text
        .split(',')
        .map(|part| {
            let f: f64 = part
                .trim()
                .parse()
                .with_context(|| format!("`{part}` is not a number"))?;
            let two = 2.0 * f;
            if f < 0.0 || (two - two.round()).abs() > 1e-9 {
                bail!("`{part}` is not a non-negative integer or half-integer");
            }
            Ok(two.round() as u32)
        })
        .collect::<Result<_>>()?;
    let [g, b, e, d] = doubled[..] else {
        bail!("expected four comma-separated values F_g,F_b,F_e,F_d, got `{text}`");
    };
    Ok(CascadeLevels::from_doubled(g, b, e, d)?)
}

pub fn path_levels(name: &str) -> Result<CascadeLevels> {
    match name.to_ascii_uppercase().as_str() {
        "X" => Ok(CascadeLevels::PATH_X),
        "Y" => Ok(CascadeLevels::PATH_Y),
        _ => Err(anyhow!("unknown decay path `{name}` (expected X or Y)")),
    }
}

/// Either a named analyzer (`H`, `V`, `D`, `A`, `L`, `R`) or a Jones vector
/// `c_h,c_v` of complex numbers such as `0.7+0.57i,0.41i`, normalized on
/// parsing.
pub fn projector(text: &str) -> Result<Projector> {
    if let Some(p) = Projector::named(text.trim()) {
        return Ok(p);
    }
    let (h, v) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("`{text}` is neither an analyzer name nor `c_h,c_v`"))?;
    let parse = |s: &str| C64::from_str(&s.replace(' ', "")).map_err(|_| anyhow!("`{s}` is not a complex number"));
    Ok(Projector::normalized(parse(h)?, parse(v)?)?)
}

/// A state given as `X`/`Y` (predicted path state) or a JSON file holding a
/// ket or a density matrix.
pub enum StateSpec {
    Pure(BiphotonKet),
    Mixed(DensityMatrix4),
}

impl StateSpec {
    pub fn density(&self) -> DensityMatrix4 {
        match self {
            StateSpec::Pure(k) => density_from_ket(k),
            StateSpec::Mixed(rho) => rho.clone(),
        }
    }
}

pub fn state(text: &str, meta: &mut Metadata) -> Result<StateSpec> {
    if let Ok(levels) = path_levels(text) {
        return Ok(StateSpec::Pure(ket_from_path(&predict_path_state(&levels)?)));
    }
    let bytes = meta.read_input(Path::new(text))?;
    if let Ok(k) = serde_json::from_slice::<BiphotonKet>(&bytes) {
        return Ok(StateSpec::Pure(BiphotonKet::new(k.basis, k.amplitudes)?));
    }
    let rho: DensityMatrix4 =
        serde_json::from_slice(&bytes).with_context(|| format!("`{text}` holds neither a ket nor a density matrix"))?;
    Ok(StateSpec::Mixed(rho))
}

pub fn ket(text: &str, meta: &mut Metadata) -> Result<BiphotonKet> {
    match state(text, meta)? {
        StateSpec::Pure(k) => Ok(k),
        StateSpec::Mixed(_) => bail!("`{text}` must be a pure state"),
    }
}

/// `R,phi` pair.
pub fn ratio_phase(text: &str) -> Result<(f64, f64)> {
    let (r, phi) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("expected `R,phi`, got `{text}`"))?;
    Ok((r.trim().parse()?, phi.trim().parse()?))
}
