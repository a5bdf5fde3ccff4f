//! Polarization-entangled photon pairs from two-path atomic cascades.

pub mod angmom;
pub mod entanglement;
pub mod error;
pub mod lm;
pub mod polstate;
pub mod timecorr;
pub mod tomography;

pub use error::{Error, Result};
