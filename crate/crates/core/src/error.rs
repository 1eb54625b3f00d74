use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension p = {0} is below the minimum of 3")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variance spectrum must be non-increasing: sigma2[{index}] = {next} exceeds sigma2[{prev_index}] = {prev}", prev_index = index - 1)]
    IncreasingSpectrum { index: usize, prev: f64, next: f64 },

    #[error("invalid value for {name}: {value} ({reason})")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("shape precondition failed for {profile}: {property} violated near z = {z}")]
    ShapePrecondition {
        profile: String,
        property: &'static str,
        z: f64,
    },

    #[error("no root of {what} in [{lo}, {hi}]")]
    NoRoot { what: &'static str, lo: f64, hi: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("engine {engine} cannot evaluate {quantity}")]
    EngineMismatch {
        engine: &'static str,
        quantity: &'static str,
    },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("unknown estimator name `{0}` (expected GB, JS or MLE)")]
    UnknownEstimator(String),
}

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidArgument {
        name,
        value,
        reason,
    }
}
