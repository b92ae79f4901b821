use thiserror::Error;

/// Errors raised by the simulator and its estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Hermitian symmetry violated at mode {mode}: relative mismatch {mismatch:.3e}")]
    HermitianViolation { mode: i64, mismatch: f64 },

    #[error("non-finite amplitude at mode {mode}")]
    NonFinite { mode: i64 },

    #[error("grid of {grid} points cannot represent {modes} modes (need an even grid of at least {required})")]
    Alias { grid: usize, modes: usize, required: usize },

    #[error("non-finite amplitude at t = {t}: the trajectory blew up")]
    BlowUp { t: f64 },

    #[error("step rejected at t = {t}: dt = {dt:.3e} exceeds the CFL limit {limit:.3e}")]
    StepRejected { t: f64, dt: f64, limit: f64 },

    #[error("Cole-Hopf potential spans {span:.1} e-folds (limit {limit:.1}); viscosity too small for the oracle")]
    OracleRange { span: f64, limit: f64 },

    #[error("window [{start}, {end}] is outside the recorded range [{first}, {last}]")]
    Window { start: f64, end: f64, first: f64, last: f64 },

    #[error("ensemble needs at least {required} members, got {got}")]
    EnsembleTooSmall { required: usize, got: usize },

    #[error("separation {l} is below the grid resolution 1/{grid}")]
    Resolution { l: f64, grid: usize },

    #[error("wavenumber band up to {upper} exceeds the truncation N = {n_modes}")]
    Band { upper: f64, n_modes: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample error: {0}")]
    Sample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
