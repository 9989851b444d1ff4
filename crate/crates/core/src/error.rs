use thiserror::Error;

/// Errors raised by protocol construction and the propagation machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CavityError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("superluminal drive: max |dz/dt| = {max_speed} >= 1")]
    Superluminal { max_speed: f64 },

    #[error("non-positive cavity length: min z = {min_length}")]
    NonPositiveLength { min_length: f64 },

    #[error("splice at t* = {t_star} is discontinuous: |2qL0 - 2z(t*)| = {mismatch}")]
    SpliceDiscontinuity { t_star: f64, mismatch: f64 },

    #[error("time {t} lies outside the protocol domain [{start}, {end})")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("propagation past the protocol horizon (needed t = {needed}, domain ends at {end})")]
    HorizonExceeded { needed: f64, end: f64 },

    #[error("segment active at t = {t} is not periodic")]
    NotPeriodic { t: f64 },

    #[error("lift is not strictly increasing near x = {x}")]
    NonMonotoneLift { x: f64 },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid medium schedule: {0}")]
    InvalidMedium(String),
}

pub type Result<T> = std::result::Result<T, CavityError>;
