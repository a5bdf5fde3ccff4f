use thiserror::Error;

use crate::tomography::TomographyResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular momentum: 2j = {two_j}, 2m = {two_m}")]
    AngularMomentum { two_j: u32, two_m: i32 },

    #[error("invalid cascade levels: {0}")]
    Levels(String),

    #[error("both coupling channels vanish; no biphoton state is produced")]
    DegenerateState,

    #[error("projector is not normalized (|c_h|^2 + |c_v|^2 = {0})")]
    UnnormalizedProjector(f64),

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("ket is not normalized (norm^2 = {0})")]
    UnnormalizedKet(f64),

    #[error("unknown basis tag `{0}`")]
    UnknownBasis(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("X-path projection amplitude vanishes; swap the roles of the two paths")]
    SuppressedReferencePath,

    #[error("measurement settings do not span the two-qubit operator space (rank {rank} < 16)")]
    InsufficientSpan { rank: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("maximum-likelihood search did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        best: Box<TomographyResult>,
    },

    #[error("fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("fit did not converge after {iterations} iterations (best chi2 {chi2:e} at {best:?})")]
    FitNotConverged {
        iterations: usize,
        best: Vec<f64>,
        chi2: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}, field `{field}`: {message}")]
    Parse { line: u64, field: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
