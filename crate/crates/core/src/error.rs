use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("escaped-path fraction {fraction:.4} exceeds the limit {limit:.4}")]
    Escaped { fraction: f64, limit: f64 },

    #[error("missing tail model: profile is only known on [{lo}, {hi}]")]
    MissingTailModel { lo: f64, hi: f64 },

    #[error("right-hand side is not centered: |mean| = {mean:.3e} > tolerance {tolerance:.3e}")]
    NotCentered { mean: f64, tolerance: f64 },

    #[error("tail not resolved: {0}")]
    TailNotResolved(String),

    #[error("signal below noise floor: {0}")]
    SignalBelowNoise(String),

    #[error("point {y} outside the tabulated drift grid [{lo}, {hi}]")]
    Extrapolation { y: f64, lo: f64, hi: f64 },

    #[error("{what} not supplied by coefficient set `{system}`")]
    MissingDerivative { what: &'static str, system: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
