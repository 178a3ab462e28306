use thiserror::Error;

/// Errors raised anywhere in the simulation and calibration stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} outside the valid range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("integrator failed at t = {t} ns: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("norm drift {0:.3e} exceeds the allowed bound")]
    NormDrift(f64),

    #[error("denominator {0:.3e} GHz is too close to zero")]
    SingularDenominator(f64),

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("calibration of {gate} failed: {reason}")]
    CalibrationFailed { gate: String, reason: String },

    #[error("no oscillation found (spectral peak {peak:.3e} vs median {median:.3e})")]
    NoOscillation { peak: f64, median: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("bad probability distribution: {0}")]
    BadDistribution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
