use thiserror::Error;

use crate::types::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero-norm input{}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    ZeroNormInput { row: Option<usize> },

    #[error("invalid embeddings: {0}")]
    Validation(ValidationReport),

    #[error("unknown anchor id {0:?}")]
    UnknownAnchorId(String),

    #[error("invalid anchor spec: {0}")]
    InvalidAnchorSpec(String),

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("degenerate row {row}: no spread among finite entries")]
    DegenerateRow { row: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("n = {n} exceeds the configured cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("column identifiers of the two matrices do not correspond")]
    ColumnMismatch,

    #[error("row {row} contains non-finite values")]
    NonFiniteRow { row: usize },

    #[error("training data must contain at least two classes")]
    SingleClassData,

    #[error("non-finite feature at row {row} col {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("split is empty")]
    EmptySplit,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("payload checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse { offset, message: message.into() }
    }
}
