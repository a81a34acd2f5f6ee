use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("grid: {0}")]
    InvalidGrid(String),

    #[error("invalid propagator config: {0}")]
    InvalidConfig(String),

    #[error("mass-critical degeneracy: 4 - 2b - N*alpha = 0, beta undefined")]
    MassCriticalDegeneracy,

    #[error("blow-up exponent undefined: N*alpha - 4 + 2b = {0} <= 0")]
    NonPositiveBlowupDenominator(f64),

    #[error("state is not effectively compactly supported: boundary mass fraction {fraction:.3e} exceeds {tol:.1e}")]
    SigmaInvalid { fraction: f64, tol: f64 },

    #[error("Picard iteration did not contract after {iterations} iterations (last increment {increment:.3e})")]
    NoContraction { iterations: usize, increment: f64 },

    #[error("gamma = {gamma} lies outside the admissible interval for case {case}")]
    GammaOutOfRange { gamma: f64, case: String },

    #[error("tau = {tau} outside the admissible interval (0, {max})")]
    TauOutOfRange { tau: f64, max: f64 },

    #[error("calibration constant must be positive, got {0}")]
    NonPositiveConstant(f64),

    #[error("initial mass {norm:.6} is not below the threshold {threshold:.6}")]
    ThresholdViolated { norm: f64, threshold: f64 },

    #[error("shooting bracket [{lo}, {hi}] does not straddle the ground state")]
    NoBracket { lo: f64, hi: f64 },

    #[error("initial data: {0}")]
    InitData(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("state became non-finite after t = {t}")]
    NonFinite { t: f64 },

    #[error("differences below 1e-13: decay faster than measurable")]
    DegenerateFit,
}

pub type Result<T> = std::result::Result<T, Error>;
