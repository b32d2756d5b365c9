use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("field amplitude outside the cutoff support (weight {weight:e})")]
    SupportViolation { weight: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("charge drift {drift:e} exceeds {threshold:e} at t = {t}")]
    Instability { drift: f64, threshold: f64, t: f64 },

    #[error("time step {dt} does not divide the horizon {horizon}")]
    StepMismatch { dt: f64, horizon: f64 },

    #[error("fixed-point map is not contracting (factor {factor:.3}); shorten the horizon")]
    NonContraction { factor: f64 },

    #[error("no convergence after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("mode {mode} out of range ({count} modes)")]
    InvalidMode { mode: usize, count: usize },

    #[error("truncation tail {tail:e} exceeds {threshold:e}; need particle cap >= {psi_cap} and boson cap >= {a_cap}")]
    CapsTooSmall { tail: f64, threshold: f64, psi_cap: usize, a_cap: usize },

    #[error("time {t} outside the sampled interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("requested tolerance {tolerance:e} not reached (estimate {estimate:e})")]
    ToleranceNotMet { tolerance: f64, estimate: f64 },

    #[error("iteration budget of {0} exhausted")]
    Budget(usize),

    #[error("dimension {dim} exceeds the dense limit {max}")]
    DenseTooLarge { dim: usize, max: usize },

    #[error("states live in different bases")]
    BasisMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
