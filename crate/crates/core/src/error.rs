use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("duplicate hit id {0}")]
    DuplicateHitId(u64),

    #[error("hit {hit} on module {module} has z = {z}, expected {expected}")]
    ModuleMismatch {
        hit: usize,
        module: usize,
        z: f64,
        expected: f64,
    },

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("value {value} outside of domain: {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("problem too large: {0}")]
    Size(String),

    #[error("event carries no truth information")]
    MissingTruth,

    #[error("singular matrix: smallest singular value {sigma_min:e} below cutoff (largest {sigma_max:e})")]
    Singular { sigma_min: f64, sigma_max: f64 },

    #[error(
        "matrix has a negative eigenvalue {0}; phase estimation expects a positive definite matrix"
    )]
    NegativeSpectrum(f64),

    #[error("right-hand side is not uniform; only Hadamard state preparation is supported")]
    NonUniformRhs,

    #[error("eigenvalue {eigenvalue} rounds to the zero phase register value")]
    ZeroPhase { eigenvalue: f64 },

    #[error("post-selection failed: ancilla success probability {0:e}")]
    AncillaNeverOne(f64),

    #[error("degenerate calibration batch: {0}")]
    DegenerateBatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front-ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicateHitId(_)
            | Error::ModuleMismatch { .. }
            | Error::InvalidEvent(_)
            | Error::MissingTruth
            | Error::DegenerateBatch(_) => ErrorKind::Data,
            Error::Dimension { .. }
            | Error::Domain { .. }
            | Error::Size(_)
            | Error::Singular { .. }
            | Error::NegativeSpectrum(_)
            | Error::NonUniformRhs
            | Error::ZeroPhase { .. }
            | Error::AncillaNeverOne(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
