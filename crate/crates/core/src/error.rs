use thiserror::Error;

/// Errors raised across the crate. Every variant maps to a stable,
/// machine-readable reason tag through [`Error::reason`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coupling time is almost surely infinite (sigma2 = sigma1, a2 <= a1 under synchronous coupling)")]
    NeverCouples,

    #[error("unstable grid: dt = {dt:e} exceeds the explicit stability limit {limit:e}")]
    Unstable { dt: f64, limit: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("verdict mismatch: {0}")]
    VerdictMismatch(String),

    #[error("invalid run file: {0}")]
    RunFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Precondition(_) => "precondition",
            Error::NeverCouples => "never_couples",
            Error::Unstable { .. } => "unstable_grid",
            Error::InsufficientData(_) => "insufficient_data",
            Error::VerdictMismatch(_) => "verdict_mismatch",
            Error::RunFile(_) => "invalid_run_file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
