use std::path::PathBuf;

/// Errors raised by the spectral, statistical and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid exact to degree {available} but degree {required} is needed")]
    Resolution { required: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no basis rotation for degree {0}")]
    MissingRotation(usize),

    #[error("time window tail {tail:.3e} exceeds tolerance {tolerance:.3e}")]
    Window { tail: f64, tolerance: f64 },

    #[error("non-finite or runaway solution after T = {last_time}")]
    BlowUp { last_time: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Picard map does not contract: measured factor {factor:.4}")]
    ContractionFailure { factor: f64 },

    #[error("point (T = {t}, R = {r}) lies outside the Penrose image (cos T + cos R <= 0)")]
    OutOfImage { t: f64, r: f64 },

    #[error("eigen-expansion residual {residual:.3e} above tolerance {tolerance:.3e}")]
    Representation { residual: f64, tolerance: f64 },

    #[error("time interpolation error estimate {estimate:.3e} above {tolerance:.3e}; refine dt")]
    RefineDt { estimate: f64, tolerance: f64 },

    #[error("degree {n}: no admissible basis after {attempts} attempts")]
    ExhaustedAttempts { n: usize, attempts: usize },

    #[error("manifest validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
