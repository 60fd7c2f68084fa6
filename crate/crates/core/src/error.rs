use std::path::PathBuf;

use thiserror::Error;

use crate::se3::FrameId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative time step {0} s")]
    NegativeTimeStep(f64),

    #[error("non-positive interval between differential measurements ({0} s)")]
    NonPositiveInterval(f64),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("out-of-order event at t={event} s, filter already at t={filter} s")]
    OutOfOrder { event: f64, filter: f64 },

    #[error("measurement sources differ: {0} vs {1}")]
    SourceMismatch(String, String),

    #[error("measurement kind {0:?} cannot be fused this way")]
    WrongKind(crate::ekf::MeasurementKind),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: column `{column}` is not finite")]
    NonFiniteField { line: usize, column: String },

    #[error("line {line}: quaternion norm {norm} is not unit")]
    QuaternionNorm { line: usize, norm: f64 },

    #[error("line {line}: duplicate timestamp {t}")]
    DuplicateTimestamp { line: usize, t: f64 },

    #[error("line {line}: timestamp {t} decreases (row {row})")]
    NonMonotonic { line: usize, row: usize, t: f64 },

    #[error("no estimate could be paired with ground truth")]
    EmptyAssociation,

    #[error("degenerate alignment geometry: {0}")]
    DegenerateGeometry(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::InvalidParameter(_) | Error::Config(_) => ErrorClass::Usage,
            Error::NonFinite(_)
            | Error::NegativeTimeStep(_)
            | Error::SingularInnovation
            | Error::DegenerateGeometry(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}

/// Attaches pipeline-stage context to an error.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
