use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: date {date} is earlier than the previous row")]
    NonMonotonicDates { line: u64, date: String },

    #[error("line {line}: duplicate row for ({date}, {asset})")]
    DuplicateRow { line: u64, date: String, asset: String },

    #[error("line {line}: unknown indicator id {id:?}")]
    UnknownIndicator { line: u64, id: String },

    #[error("line {line}: asset {asset:?} is not part of the return panel")]
    UnknownAsset { line: u64, asset: String },

    #[error("industry group {0:?} has no supersector mapping")]
    UnmappedIndustryGroup(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
