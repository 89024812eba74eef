use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("network exceeds model capacity: {n} nodes, max_n = {max_n}")]
    Capacity { n: usize, max_n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("backward already ran on this tape")]
    BackwardTwice,

    #[error("non-finite loss at epoch {epoch} (batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("missing RSSI matrix in sample {index}")]
    MissingRssi { index: usize },

    #[error("{}:{line}: {kind}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        kind: ParseErrorKind,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Classes of rejected input rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Wrong header, field count, or unparsable field.
    Malformed,
    OutOfRange,
    UnknownAp,
    Duplicate,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Malformed => "malformed row",
            ParseErrorKind::OutOfRange => "value out of range",
            ParseErrorKind::UnknownAp => "unknown AP id",
            ParseErrorKind::Duplicate => "duplicate row",
        })
    }
}

impl Error {
    /// Short stable tag used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::Dimension { .. } => "dimension",
            Error::EmptyDataset => "empty_dataset",
            Error::Capacity { .. } => "capacity",
            Error::Config(_) => "config",
            Error::BackwardTwice => "backward_twice",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::MissingRssi { .. } => "missing_rssi",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Version { .. } => "version",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
