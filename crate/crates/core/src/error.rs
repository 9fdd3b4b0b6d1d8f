use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid box ({x_min}, {x_max}, {y_min}, {y_max}): need 0 <= min <= max <= 1")]
    InvalidBox { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("triplet ({label1}, {relation}, {label2}) is not in the vocabulary")]
    UnknownTriplet { label1: String, relation: String, label2: String },
    #[error("duplicate triplet ({label1}, {relation}, {label2})")]
    DuplicateTriplet { label1: String, relation: String, label2: String },
    #[error("class id {0} has no triplet mapping")]
    UnmappedClass(u32),
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),
    #[error("empty training set")]
    EmptyDataset,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
