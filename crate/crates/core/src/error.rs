use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("feature matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("covariance accumulator has seen no samples")]
    EmptyAccumulator,

    #[error("matrix is not symmetric (max relative deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("eigenvalue {value:e} below tolerance -{tolerance:e}; matrix is not positive semidefinite")]
    NotPositiveSemidefinite { value: f64, tolerance: f64 },

    #[error("symmetric eigendecomposition failed to converge")]
    EigenFailure,

    #[error("power-law fit needs at least {required} usable eigenvalues, found {usable}")]
    TooFewPoints { usable: usize, required: usize },

    #[error("degenerate fit range [{lo}, {hi}]")]
    DegenerateRange { lo: usize, hi: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Gram matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("step size unstable: eta * lambda_max = {eta_lambda} (must be < 1)")]
    UnstableStep { eta_lambda: f64 },

    #[error("gradient descent diverged at step {step}: train mse {mse:e} vs minimum {min_mse:e}")]
    Divergence { step: u64, mse: f64, min_mse: f64 },

    #[error("train split contains a single class")]
    SingleClass,

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    InvalidLabel { index: usize, label: usize, classes: usize },

    #[error("label noise needs at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("correlation undefined: {0} series has zero variance")]
    ZeroVariance(&'static str),

    #[error("correlation needs at least {required} points, got {got}")]
    TooFewPairs { got: usize, required: usize },

    #[error(transparent)]
    Format(#[from] crate::io::FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures (as opposed to bad input) map to exit status 2 in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. }
                | Error::EigenFailure
                | Error::RankDeficient { .. }
                | Error::UnstableStep { .. }
                | Error::Divergence { .. }
                | Error::ZeroVariance(_)
                | Error::TooFewPoints { .. }
        )
    }
}
