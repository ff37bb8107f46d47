use thiserror::Error;

use crate::numerics::SpectrumBounds;

/// Errors raised by the numerical kernels, the detectors and the harness.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("Hermitian factorization failed: pivot {pivot} at row {index} is not positive")]
    FactorizationFailure { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("power iteration did not reach the requested tolerance (partial estimates {partial:?})")]
    Unconverged { partial: Box<SpectrumBounds> },

    #[error("bit sequence has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("value {value} is not a binary digit")]
    InvalidBit { value: u8 },

    #[error("symbol {re}{im:+}j at position {index} is not a constellation point")]
    NotInConstellation { index: usize, re: f64, im: f64 },

    #[error("layer {layer}: 4^(q-1)*rho - alpha_q = {gamma} is not positive")]
    HardFailure { layer: usize, gamma: f64 },

    #[error("iterate became non-finite at iteration {iteration}")]
    NumericalBlowup { iteration: usize },

    #[error("exhaustive search over {candidates} candidates exceeds the cap of {cap}")]
    TooLarge { candidates: f64, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
