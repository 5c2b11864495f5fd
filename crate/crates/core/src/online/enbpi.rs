use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StepRecord;
use crate::error::{ConformalError, Result};
use crate::exchangeable::{
    empirical_quantile, ConfidenceLevel, Dataset, Learner, PredictionInterval, Predictor, Row,
    ScoreSet,
};

/// Ensemble aggregation `φ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

impl Aggregation {
    /// Aggregates a nonempty slice; reorders it for `Median`.
    pub fn apply(self, values: &mut [f64]) -> f64 {
        debug_assert!(!values.is_empty());
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnbpiConfig {
    /// Number of bootstrap models `B`.
    pub models: usize,
    pub aggregation: Aggregation,
    /// Recalibration batch size `h`.
    pub window: usize,
    pub seed: u64,
}

/// Fitted bootstrap ensemble plus the sliding residual buffer.
#[derive(Debug, Clone)]
pub struct EnbpiState<M> {
    models: Vec<M>,
    membership: Vec<Vec<usize>>,
    aggregation: Aggregation,
    residuals: VecDeque<f64>,
    window: usize,
    train_len: usize,
    loo_models: Vec<Vec<usize>>,
    fallbacks: usize,
}

fn aggregate_rows(agg: Aggregation, preds: &[Vec<f64>]) -> Vec<f64> {
    let dim = preds[0].len();
    (0..dim)
        .map(|d| {
            let mut col: Vec<f64> = preds.iter().map(|p| p[d]).collect();
            agg.apply(&mut col)
        })
        .collect()
}

fn sup_residual(y: &[f64], center: &[f64]) -> f64 {
    y.iter()
        .zip(center)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

impl<M: Predictor> EnbpiState<M> {
    /// Trains `config.models` learners on seeded bootstrap resamples of `series`.
    ///
    /// Model `b` draws its resample from a ChaCha stream `b` under `config.seed`,
    /// so the result does not depend on the order models finish training.
    pub fn fit<L>(series: &Dataset, learner: &L, config: EnbpiConfig) -> Result<Self>
    where
        L: Learner<Model = M>,
        M: Send,
    {
        if config.models == 0 {
            return Err(ConformalError::InvalidParameter(
                "B must be at least 1".into(),
            ));
        }
        let t = series.len();
        if t < 2 {
            return Err(ConformalError::InvalidParameter(format!(
                "series length {t} < 2"
            )));
        }
        let fitted: Vec<(M, Vec<usize>)> = (0..config.models)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(b as u64);
                let idx: Vec<usize> = (0..t).map(|_| rng.random_range(0..t)).collect();
                learner.fit(&series.select(&idx)).map(|m| (m, idx))
            })
            .collect::<Result<_>>()?;
        let (models, membership) = fitted.into_iter().unzip();
        Self::from_parts(
            models,
            membership,
            series,
            config.aggregation,
            config.window,
        )
    }

    /// Builds the state from already-trained models and their index multisets,
    /// computing each leave-one-out residual from the models whose resample
    /// omits that index.
    pub fn from_parts(
        models: Vec<M>,
        membership: Vec<Vec<usize>>,
        series: &Dataset,
        aggregation: Aggregation,
        window: usize,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(ConformalError::InvalidParameter(
                "B must be at least 1".into(),
            ));
        }
        if models.len() != membership.len() {
            return Err(ConformalError::DimensionMismatch {
                expected: models.len(),
                got: membership.len(),
            });
        }
        if window == 0 {
            return Err(ConformalError::InvalidParameter(
                "window h must be positive".into(),
            ));
        }
        let t = series.len();
        let mut in_bag = vec![vec![false; t]; models.len()];
        for (b, idx) in membership.iter().enumerate() {
            for &i in idx {
                if i >= t {
                    return Err(ConformalError::InvalidParameter(format!(
                        "membership index {i} out of range for length {t}"
                    )));
                }
                in_bag[b][i] = true;
            }
        }

        let mut residuals = VecDeque::with_capacity(t);
        let mut loo_models = Vec::with_capacity(t);
        let mut fallbacks = 0;
        for (i, row) in series.rows().iter().enumerate() {
            let preds: Vec<Vec<f64>> = models.iter().map(|m| m.predict(&row.x).center()).collect();
            let mut used: Vec<usize> = (0..models.len()).filter(|&b| !in_bag[b][i]).collect();
            if used.is_empty() {
                fallbacks += 1;
                used = (0..models.len()).collect();
            }
            let chosen: Vec<Vec<f64>> = used.iter().map(|&b| preds[b].clone()).collect();
            let center = aggregate_rows(aggregation, &chosen);
            residuals.push_back(sup_residual(&row.y, &center));
            loo_models.push(used);
        }
        if fallbacks > 0 {
            log::warn!("{fallbacks} of {t} indices appeared in every bootstrap resample; used the full ensemble for them");
        }
        Ok(Self {
            models,
            membership,
            aggregation,
            residuals,
            window,
            train_len: t,
            loo_models,
            fallbacks,
        })
    }

    /// φ-aggregate of every model at `x`.
    pub fn ensemble_prediction(&self, x: &[f64]) -> Vec<f64> {
        let preds: Vec<Vec<f64>> = self.models.iter().map(|m| m.predict(x).center()).collect();
        aggregate_rows(self.aggregation, &preds)
    }

    /// Half-width `w = Q(1 - alpha, residuals)` without `+inf` augmentation.
    pub fn half_width(&self, level: ConfidenceLevel) -> Result<f64> {
        let scores = ScoreSet::new(self.residuals.iter().copied().collect())?;
        empirical_quantile(level.coverage(), &scores, false)
    }

    pub fn interval(&self, x: &[f64], level: ConfidenceLevel) -> Result<PredictionInterval> {
        let w = self.half_width(level)?;
        let center = self.ensemble_prediction(x);
        PredictionInterval::symmetric(&center, &vec![w; center.len()])
    }

    /// Appends the residuals of exactly `h` new observations and evicts the
    /// oldest so the buffer keeps length `T`. Models are not retrained.
    pub fn recalibrate(&mut self, recent: &[Row]) -> Result<()> {
        if recent.len() != self.window {
            return Err(ConformalError::DimensionMismatch {
                expected: self.window,
                got: recent.len(),
            });
        }
        for row in recent {
            let r = sup_residual(&row.y, &self.ensemble_prediction(&row.x));
            self.residuals.push_back(r);
        }
        while self.residuals.len() > self.train_len {
            self.residuals.pop_front();
        }
        Ok(())
    }

    /// Predicts each test row in order, recalibrating after every `h` observations.
    pub fn stream(&mut self, test: &Dataset, level: ConfidenceLevel) -> Result<Vec<StepRecord>> {
        let rows = test.rows();
        let mut out = Vec::with_capacity(rows.len());
        for (t, row) in rows.iter().enumerate() {
            let interval = self.interval(&row.x, level)?;
            let err = !interval.contains(&row.y);
            out.push(StepRecord {
                t,
                interval,
                y: row.y.clone(),
                err,
                alpha_t: level.alpha(),
            });
            if (t + 1) % self.window == 0 {
                self.recalibrate(&rows[t + 1 - self.window..=t])?;
            }
        }
        Ok(out)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.iter().copied().collect()
    }

    pub fn membership(&self) -> &[Vec<usize>] {
        &self.membership
    }

    /// For each training index, the models whose aggregate produced its residual.
    pub fn loo_models(&self) -> &[Vec<usize>] {
        &self.loo_models
    }

    /// Indices that were in every resample and fell back to the full ensemble.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn models(&self) -> &[M] {
        &self.models
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }
}
