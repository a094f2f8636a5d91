use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported cell count {0}: only the 19-cell wrap-around cluster is implemented")]
    UnsupportedCellCount(usize),
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("zero-forcing needs more antennas than users per cell (M = {antennas}, K = {users})")]
    TooFewAntennas { antennas: usize, users: usize },
    #[error("Gram matrix of the estimated channels at BS {bs} is numerically singular")]
    SingularGram { bs: usize },
    #[error("fading matrix of pilot index {user} is numerically singular (condition estimate {condition:e})")]
    SingularFadingMatrix { user: usize, condition: f64 },
    #[error("second-order statistics are singular after {samples} samples")]
    SingularCovariance { samples: usize },
    #[error("interference matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("closed-form statistics are only derived for the matched filter receiver")]
    ClosedFormUnavailable,
}

pub type Result<T> = core::result::Result<T, Error>;
