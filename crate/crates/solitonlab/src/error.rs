//! Error types shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A field is under-resolved for the requested operation: the top 5% of
    /// the spectrum carries more than the allowed fraction of the total
    /// spectral energy.
    #[error("resolution guard tripped: top-band energy fraction {fraction:.3e} exceeds {threshold:.3e}")]
    Resolution { fraction: f64, threshold: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("tau matrix ill-conditioned: estimated condition number {cond:.3e} exceeds 1e12 at (t={t}, x={x})")]
    IllConditioned { cond: f64, t: f64, x: f64 },

    #[error("no snapshot at t={t} (nearest is t={nearest})")]
    SnapshotNotFound { t: f64, nearest: f64 },

    #[error("fit window holds {got} samples, need at least {need}")]
    WindowEmpty { got: usize, need: usize },

    #[error("quadrature refinement disagrees by {disagreement:.3e} relative (tolerance {tol:.3e})")]
    QuadratureTolerance { disagreement: f64, tol: f64 },

    #[error("series terms still growing at n={n}; diverging input")]
    SeriesDivergence { n: usize },

    #[error("amplitude guard: |u| reached {max:.3e} at t={t} ({factor:.1}x initial)")]
    AmplitudeGuard { t: f64, max: f64, factor: f64 },

    #[error("boundary guard: |u|={max:.3e} at the domain edge at t={t}, periodic wrap-around would corrupt tails")]
    BoundaryGuard { t: f64, max: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code for the CLI: 1 check failure, 2 runtime, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CheckFailed(_) => 1,
            Error::Io(_) => 3,
            Error::Format { .. } => 3,
            _ => 2,
        }
    }
}
