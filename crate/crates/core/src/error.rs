use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty mark list")]
    EmptySpace,
    #[error("invalid mark at index {index}: {reason}")]
    InvalidMark { index: usize, reason: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("policy {policy} is not monotone: {reason}")]
    NonMonotone { policy: String, reason: String },
    #[error("path does not cover time {0}")]
    PathTooShort(i64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
