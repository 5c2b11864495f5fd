//! Joint prediction regions over `k` future steps.
//!
//! Each calibration series contributes one score per horizon. CF-RNN spends
//! the miscoverage budget evenly (`1 - alpha/k` per step); CopulaCPTS fits an
//! empirical copula over the per-step score ranks and searches for per-step
//! thresholds whose joint empirical coverage reaches `1 - epsilon`.

mod calibrate;
mod copula;
mod scores;

pub use calibrate::{
    bonferroni_level, cfrnn_calibrate, copula_calibrate, copula_search, CopulaSearch,
    CopulaThresholds,
};
pub use copula::{frechet_bounds, Copula, EmpiricalCdf, EmpiricalCopula, ProductCopula};
pub use scores::{collect_horizon_scores, HorizonScores};

use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};
use crate::exchangeable::{Prediction, PredictionInterval, ScoreFunction};

/// One series: `t` input steps and `k` target steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.targets.len()
    }
}

/// A fitted model producing a `k`-step forecast from an input window.
pub trait HorizonForecaster: Send + Sync {
    fn horizon(&self) -> usize;

    /// One prediction per future step.
    fn forecast(&self, inputs: &[Vec<f64>]) -> Vec<Prediction>;
}

impl<F: HorizonForecaster + ?Sized> HorizonForecaster for &F {
    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn forecast(&self, inputs: &[Vec<f64>]) -> Vec<Prediction> {
        (**self).forecast(inputs)
    }
}

/// Per-step intervals for one series plus the thresholds that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub intervals: Vec<PredictionInterval>,
    pub thresholds: Vec<f64>,
    pub epsilon: f64,
}

impl RegionSet {
    pub fn horizon(&self) -> usize {
        self.intervals.len()
    }

    /// `true` when every step of `targets` lies in its interval.
    pub fn covers(&self, targets: &[Vec<f64>]) -> bool {
        targets.len() == self.intervals.len()
            && self
                .intervals
                .iter()
                .zip(targets)
                .all(|(iv, y)| iv.contains(y))
    }

    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(PredictionInterval::width).sum()
    }
}

/// Inverts each step's score at its threshold: `[ŷ_h - thr_h, ŷ_h + thr_h]`
/// for absolute residuals.
pub fn predict_regions<F: HorizonForecaster + ?Sized>(
    inputs: &[Vec<f64>],
    model: &F,
    score_fn: ScoreFunction,
    thresholds: &[f64],
    epsilon: f64,
) -> Result<RegionSet> {
    let preds = model.forecast(inputs);
    if preds.len() != thresholds.len() {
        return Err(ConformalError::DimensionMismatch {
            expected: preds.len(),
            got: thresholds.len(),
        });
    }
    let intervals = preds
        .iter()
        .zip(thresholds)
        .map(|(p, &thr)| score_fn.invert(p, thr))
        .collect::<Result<_>>()?;
    Ok(RegionSet {
        intervals,
        thresholds: thresholds.to_vec(),
        epsilon,
    })
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Forecasts fixed per-step values regardless of input.
    pub struct FixedForecast(pub Vec<f64>);

    impl HorizonForecaster for FixedForecast {
        fn horizon(&self) -> usize {
            self.0.len()
        }

        fn forecast(&self, _inputs: &[Vec<f64>]) -> Vec<Prediction> {
            self.0.iter().map(|v| Prediction::Point(vec![*v])).collect()
        }
    }
}
