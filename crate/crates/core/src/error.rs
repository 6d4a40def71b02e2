use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
///
/// Variants are grouped by how a caller is expected to react: shape and
/// argument problems, malformed data, and numeric failures (singular fits,
/// divergent training, domain violations of closed-form divergences).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("label {label} out of range for {num_classes} classes (sample {sample})")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("singular regression: {0}")]
    Singular(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("imaginary residue {0:e} exceeds tolerance")]
    ImaginaryResidue(f64),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("running statistics unavailable: {0}")]
    NoRunningStats(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {dump}")]
    Diverged {
        epoch: usize,
        batch: usize,
        dump: String,
    },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

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

    pub(crate) fn at_sample(index: usize, source: Error) -> Self {
        Error::AtSample {
            index,
            source: Box::new(source),
        }
    }

    /// Coarse classification used by the command line front end.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Shape(_) => ErrorKind::Usage,
            Error::BadMagic { .. }
            | Error::UnsupportedVersion(_)
            | Error::Truncated(_)
            | Error::LabelOutOfRange { .. }
            | Error::Malformed(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::NonFinite(_)
            | Error::Singular(_)
            | Error::Domain(_)
            | Error::ImaginaryResidue(_)
            | Error::Quadrature(_)
            | Error::NoRunningStats(_)
            | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::AtSample { source, .. } => source.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

pub type Result<T> = std::result::Result<T, Error>;
