use std::fmt;

use crate::geometry::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("zero has no factorization or finite valuation")]
    ZeroInput,
    #[error("{0} is not a prime")]
    NotPrime(u128),
    #[error("the all-zero tuple is not a projective point")]
    ZeroPoint,
    #[error("expected {expected} coordinates, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("integer overflow while {0}")]
    Overflow(&'static str),
    #[error("point {point} lies on boundary component {component}")]
    OnComponent { point: String, component: usize },
    #[error("prime {0} belongs to S; no multiplicity is defined there")]
    PrimeInS(u128),
    #[error("component index {index} out of range ({len} components)")]
    ComponentIndex { index: usize, len: usize },
    #[error("weight vector has {found} entries, model has {expected} components")]
    WeightCount { expected: usize, found: usize },
    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("enumeration is supported for ambient dimension 1 or 2, not {0}")]
    UnsupportedDimension(usize),
    #[error("oracle {oracle} does not apply: {reason}")]
    OracleNotApplicable { oracle: String, reason: String },
    #[error("network failure: {0}")]
    Network(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(msg: impl fmt::Display) -> Self {
        Error::Parse(msg.to_string())
    }
}
