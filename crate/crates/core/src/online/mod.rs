//! Conformal intervals for a single time series under distribution shift.
//!
//! [`EnbpiState`] keeps a bootstrap ensemble fixed and slides a window of
//! leave-one-out residuals forward as new observations arrive. [`AciState`]
//! keeps the score model fixed and instead tracks the miscoverage level
//! `alpha_t` online so that long-run miscoverage matches the target.

mod aci;
mod enbpi;

pub use aci::{AciBound, AciState, DEFAULT_GAMMA, DEFAULT_WINDOW};
pub use enbpi::{Aggregation, EnbpiConfig, EnbpiState};

use serde::{Deserialize, Serialize};

use crate::exchangeable::PredictionInterval;

/// One streamed prediction and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub interval: PredictionInterval,
    pub y: Vec<f64>,
    /// `true` when `y` fell outside the interval.
    pub err: bool,
    /// Miscoverage level used for this step.
    pub alpha_t: f64,
}
