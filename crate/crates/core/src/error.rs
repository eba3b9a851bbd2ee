use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: unknown label {token:?} (expected +1, 1 or -1)")]
    UnknownLabel { line: usize, token: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("line {line}: row has {found} features, expected {expected}")]
    RowDimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset file contains no instances")]
    EmptyFile,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("too few bags for {k} folds: {positives} positive, {negatives} negative")]
    TooFewBags {
        k: usize,
        positives: usize,
        negatives: usize,
    },

    #[error("unknown bag id {0}")]
    UnknownBag(u64),

    #[error("brute-force cover limited to {max} nodes, graph has {nodes}")]
    SizeGuard { nodes: usize, max: usize },

    #[error("concave function is flat at the covering threshold t={t}")]
    DegenerateConcave { t: u32 },

    #[error("requested {requested} clusters but only {available} nodes were selected")]
    TooManyClusters { requested: usize, available: usize },

    #[error("positive training set is empty")]
    EmptyPositives,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::SizeGuard { .. }
            | Error::TooManyClusters { .. }
            | Error::DegenerateConcave { .. } => ErrorKind::Usage,
            Error::NonFinite(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
