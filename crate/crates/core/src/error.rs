//! Crate-wide error type.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across dataset IO, providers, selectors
/// and the experiment harness.
#[derive(Debug)]
pub enum Error {
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
    /// A CSV/binary row could not be interpreted. `row` is 1-based over data rows.
    MalformedRow { row: usize, reason: String },
    MissingColumn { column: String },
    NonNumericCell { row: usize, column: String },
    EmptyDataset,
    LengthMismatch { what: &'static str, expected: usize, actual: usize },
    /// Split fractions do not sum to one or lie outside their ranges.
    InvalidFractions { reason: String },
    ClassTooSmall { class: String, size: usize, needed: usize },
    IndexOutOfRange { index: usize, len: usize },
    MemoryBudget { required: usize, budget: usize },
    AsymmetricMatrix { i: usize, j: usize, delta: f64 },
    NonZeroDiagonal { i: usize, value: f64 },
    DimensionMismatch { expected: usize, actual: usize },
    /// Pooled covariance not positive definite; raise the ridge term.
    SingularCovariance,
    NeedTwoClasses,
    DuplicateGenes,
    TooFewGenes { got: usize, need: usize },
    EmptyValidation,
    PoolTooSmall { pool: usize, k: usize },
    ClusteringFailed { rounds: usize },
    AcceleratorMissing,
    AcceleratorStale { expected: u64, actual: u64 },
    AcceleratorNotEncoded,
    /// All pivot radii are zero: the training sample carries no spread.
    DegenerateSample,
    BadFormat { reason: String },
    InvalidParameter { name: &'static str, reason: String },
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
            Error::MalformedRow { row, reason } => write!(f, "malformed row {row}: {reason}"),
            Error::MissingColumn { column } => write!(f, "column {column:?} not found in header"),
            Error::NonNumericCell { row, column } => {
                write!(f, "row {row}, column {column:?}: not a numeric value")
            }
            Error::EmptyDataset => write!(f, "dataset has no rows"),
            Error::LengthMismatch { what, expected, actual } => {
                write!(f, "{what}: expected length {expected}, got {actual}")
            }
            Error::InvalidFractions { reason } => write!(f, "invalid split fractions: {reason}"),
            Error::ClassTooSmall { class, size, needed } => write!(
                f,
                "class {class:?} has {size} members but {needed} nonzero splits were requested"
            ),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "object index {index} out of range (n = {len})")
            }
            Error::MemoryBudget { required, budget } => write!(
                f,
                "precomputed matrix needs {required} bytes, budget is {budget}"
            ),
            Error::AsymmetricMatrix { i, j, delta } => write!(
                f,
                "matrix not symmetric at ({i},{j}): |d_ij - d_ji| = {delta:e}"
            ),
            Error::NonZeroDiagonal { i, value } => {
                write!(f, "matrix diagonal entry {i} is {value:e}, expected zero")
            }
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::SingularCovariance => write!(
                f,
                "pooled covariance is singular; use a regularization term > 0"
            ),
            Error::NeedTwoClasses => write!(f, "at least two classes are required"),
            Error::DuplicateGenes => write!(f, "individual contains duplicate gene indices"),
            Error::TooFewGenes { got, need } => {
                write!(f, "individual has {got} genes, at least {need} required")
            }
            Error::EmptyValidation => write!(f, "validation set is empty"),
            Error::PoolTooSmall { pool, k } => {
                write!(f, "candidate pool of {pool} cannot supply {k} distinct prototypes")
            }
            Error::ClusteringFailed { rounds } => write!(
                f,
                "could not form nonempty clusters after {rounds} center re-draws"
            ),
            Error::AcceleratorMissing => write!(f, "no pivot-table accelerator attached"),
            Error::AcceleratorStale { expected, actual } => write!(
                f,
                "pivot table trained on dataset revision {expected:016x}, provider has {actual:016x}"
            ),
            Error::AcceleratorNotEncoded => {
                write!(f, "pivot table has no object codes; encode the dataset first")
            }
            Error::DegenerateSample => {
                write!(f, "all pivot radii are zero: training sample is degenerate")
            }
            Error::BadFormat { reason } => write!(f, "bad file format: {reason}"),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter {name}: {reason}")
            }
            Error::Config(reason) => write!(f, "invalid configuration: {reason}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Csv(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
