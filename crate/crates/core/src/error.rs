use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid filter `{name}`: {reason}")]
    InvalidFilter { name: String, reason: String },

    #[error("cascade did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NonConvergent { iterations: usize, last_change: f64 },

    #[error("derivative order {requested} exceeds available regularity {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("seminorm diverges: weighted values still {edge:.3e} at |x| = {radius}")]
    DivergentSeminorm { radius: f64, edge: f64 },

    #[error("empty test-function family")]
    EmptyFamily,

    #[error("test function decays too slowly for term growth: {0}")]
    GrowthMismatch(String),

    #[error("scale epsilon must be positive, got {0}")]
    EpsilonNonpositive(f64),

    #[error("need at least {needed} scales, got {got}")]
    InsufficientScales { needed: usize, got: usize },

    #[error("battery slopes disagree: spread {spread:.4} exceeds {tolerance}")]
    InconsistentDegree { spread: f64, tolerance: f64 },

    #[error("every battery pairing vanishes")]
    AllPairingsVanish,

    #[error("measure assigns negative mass {mass:.3e} to a ball of radius {radius:.3e}")]
    NegativeMeasure { radius: f64, mass: f64 },

    #[error("hypothesis `{clause}` failed: {detail}")]
    HypothesisFailed { clause: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
