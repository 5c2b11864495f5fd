use super::{HorizonForecaster, Trajectory};
use crate::error::{ConformalError, Result};
use crate::exchangeable::{ScoreFunction, ScoreSet};

/// Calibration scores laid out both per series (rows) and per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonScores {
    rows: Vec<Vec<f64>>,
    sets: Vec<ScoreSet>,
}

impl HorizonScores {
    /// `rows[i][h]` is the score of calibration series `i` at step `h`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(ConformalError::EmptyCalibration);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(ConformalError::RaggedSeries(format!(
                "expected {k} horizon scores per series, got {}",
                bad.len()
            )));
        }
        let sets = (0..k)
            .map(|h| {
                ScoreSet::new(rows.iter().map(|r| r[h]).collect()).map(|s| s.with_horizon(h + 1))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows, sets })
    }

    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    pub fn n_cal(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Score set for step `h` (zero-based).
    pub fn set(&self, h: usize) -> &ScoreSet {
        &self.sets[h]
    }

    pub fn sets(&self) -> &[ScoreSet] {
        &self.sets
    }
}

/// One score per calibration series per horizon step.
pub fn collect_horizon_scores<F: HorizonForecaster + ?Sized>(
    cal: &[Trajectory],
    model: &F,
    score_fn: ScoreFunction,
) -> Result<HorizonScores> {
    let k = model.horizon();
    let rows = cal
        .iter()
        .enumerate()
        .map(|(i, series)| {
            if series.targets.len() != k {
                return Err(ConformalError::RaggedSeries(format!(
                    "series {i} has {} target steps, model forecasts {k}",
                    series.targets.len()
                )));
            }
            let preds = model.forecast(&series.inputs);
            preds
                .iter()
                .zip(&series.targets)
                .map(|(p, y)| score_fn.score(y, p))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    HorizonScores::from_rows(rows)
}
