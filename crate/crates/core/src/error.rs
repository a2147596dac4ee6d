use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("time {time} is not a grid/event time of the path")]
    OffGrid { time: f64 },
    #[error("times out of order: s = {s} > t = {t}")]
    TimeOrder { s: f64, t: f64 },
    #[error("path horizon {horizon} is shorter than the required {required}")]
    HorizonTooShort { horizon: f64, required: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("too many points for exhaustive enumeration: {points} > {max}")]
    TooManyPoints { points: usize, max: usize },
    #[error("zero quadratic variation")]
    ZeroQuadraticVariation,
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("spectral solve did not reach the residual target: residual {residual:e} > {target:e} at cutoff {cutoff}")]
    NotConverged { residual: f64, target: f64, cutoff: usize },
    #[error("{0}")]
    Mismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of a numerical procedure at runtime, as opposed to
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. } | Error::Singular(_) | Error::NotConverged { .. })
    }
}
