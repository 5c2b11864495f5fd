use thiserror::Error;

/// Errors raised by calibration, interval construction and the lab helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("empty calibration set")]
    EmptyCalibration,

    #[error("invalid level {value}: must lie in {range}")]
    InvalidLevel { value: f64, range: &'static str },

    #[error("degenerate uncertainty scale: u(x) = {0}")]
    DegenerateScale(f64),

    #[error("crossed quantiles: lo {lo} > hi {hi}")]
    CrossedQuantiles { lo: f64, hi: f64 },

    #[error("score function {score} does not accept a {prediction} prediction")]
    PredictionMismatch {
        score: &'static str,
        prediction: &'static str,
    },

    #[error("split leaves an empty partition (n = {n}, train = {train})")]
    EmptyPartition { n: usize, train: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ragged series: {0}")]
    RaggedSeries(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot calibrate conditional guarantee: no unsafe calibration records")]
    NoUnsafeRecords,

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, ConformalError>;
