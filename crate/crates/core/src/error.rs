use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the forward and inverse pipelines.
///
/// The variants are grouped so that the command-line front end can map them
/// one-to-one onto process exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right} subintervals")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite state at node {node} (lambda = {lambda})")]
    NonFinite { node: usize, lambda: Complex64 },

    #[error("|lambda|^(1/3) = {cbrt:.3} exceeds the resolution limit {limit:.3} of the grid")]
    ResolutionGuard { cbrt: f64, limit: f64 },

    #[error("Newton iteration for (n={n}, k={k}) did not converge after {iterations} steps (last lambda = {lambda})")]
    NoConvergence {
        n: usize,
        k: usize,
        iterations: usize,
        lambda: Complex64,
    },

    #[error("root for (n={n}, k={k}) at lambda = {lambda} belongs to index {found}")]
    BasinEscape {
        n: usize,
        k: usize,
        found: f64,
        lambda: Complex64,
    },

    #[error("characteristic derivative vanishes at lambda = {lambda} (|d/dlambda| = {magnitude:e}); multiple eigenvalue")]
    DerivativeVanishes { lambda: Complex64, magnitude: f64 },

    #[error("gamma_{n} vanishes (|gamma| = {magnitude:e}); spectral data are inconsistent")]
    GammaZero { n: usize, magnitude: f64 },

    #[error("lambda = {lambda} is within {distance:e} of a pole (characteristic value {value})")]
    NearPole {
        lambda: Complex64,
        value: Complex64,
        distance: f64,
    },

    #[error("kernel D(2,2) evaluated on its pole lambda = mu = {lambda}")]
    PoleHit { lambda: Complex64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("model problem violates condition {condition}: {detail}")]
    AdmissibilityViolation { condition: u8, detail: String },

    #[error("spectral data fail the {clause} check: {detail}")]
    DataViolation { clause: String, detail: String },

    #[error("main equation singular at node {node} (x = {x:.6}, condition estimate {cond:e})")]
    SingularSystem { node: usize, x: f64, cond: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tools.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse(_) | Error::InvalidGrid(_) | Error::GridMismatch { .. } => 1,
            Error::SingularSystem { .. } => 3,
            Error::AdmissibilityViolation { .. } | Error::DataViolation { .. } | Error::PoleHit { .. } => 4,
            Error::IndexOutOfRange(_) => 1,
            _ => 2,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
