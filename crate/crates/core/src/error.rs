use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed line ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: timestamp is not after the previous row")]
    NonMonotonicTime { line: usize },
    #[error("line {line}: bad timestamp ({reason})")]
    BadTimestamp { line: usize, reason: String },
    #[error("line {line}: value out of range ({reason})")]
    ValueOutOfRange { line: usize, reason: String },
    #[error("cadence mismatch: {0}")]
    CadenceMismatch(String),
    #[error("no prediction instant has complete inputs and a target")]
    EmptyIntersection,
    #[error("feature index {index} out of range for {width} columns")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("data has zero total variance")]
    DegenerateData,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no rows fall after the train/test cutoff")]
    EmptyTestSet,
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
}
