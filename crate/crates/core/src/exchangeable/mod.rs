//! Conformal prediction for exchangeable data.
//!
//! Split conformal prediction fits a model on a proper training set, scores a
//! disjoint calibration set and returns, for a new input, every target whose
//! score falls below the `(1 - alpha)` empirical quantile of the calibration
//! scores augmented with `+inf`. Under exchangeability the resulting region
//! covers the truth with probability in `[1 - alpha, 1 - alpha + 1/(n + 1)]`.

mod dataset;
mod interval;
mod quantile;
mod score;
mod split_cp;

pub use dataset::{split, Dataset, Row, SplitDataset};
pub use interval::PredictionInterval;
pub use quantile::{empirical_quantile, rank_for_level, ScoreSet};
pub use score::{score, Learner, Prediction, Predictor, ScoreFunction};
pub use split_cp::{calibrate, calibration_scores, predict_interval, SplitConformal};

use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};

/// Target miscoverage `alpha`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(ConformalError::InvalidLevel {
                value: alpha,
                range: "(0, 1)",
            })
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn coverage(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = ConformalError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ConfidenceLevel> for f64 {
    fn from(level: ConfidenceLevel) -> f64 {
        level.0
    }
}
