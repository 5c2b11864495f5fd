use super::{
    empirical_quantile, ConfidenceLevel, Dataset, Learner, PredictionInterval, Predictor,
    ScoreFunction, ScoreSet, SplitDataset,
};
use crate::error::Result;

/// Scores every calibration row against `model`.
pub fn calibration_scores<P: Predictor + ?Sized>(
    cal: &Dataset,
    model: &P,
    score_fn: ScoreFunction,
) -> Result<ScoreSet> {
    let scores = cal
        .rows()
        .iter()
        .map(|r| score_fn.score(&r.y, &model.predict(&r.x)))
        .collect::<Result<Vec<_>>>()?;
    ScoreSet::new(scores)
}

/// `(1 - alpha)` quantile of the calibration scores augmented with `+inf`.
///
/// `model` must have been fitted without seeing `cal`.
pub fn calibrate<P: Predictor + ?Sized>(
    cal: &Dataset,
    model: &P,
    score_fn: ScoreFunction,
    level: ConfidenceLevel,
) -> Result<f64> {
    let scores = calibration_scores(cal, model, score_fn)?;
    empirical_quantile(level.coverage(), &scores, true)
}

pub fn predict_interval<P: Predictor + ?Sized>(
    x: &[f64],
    model: &P,
    score_fn: ScoreFunction,
    q: f64,
) -> Result<PredictionInterval> {
    score_fn.invert(&model.predict(x), q)
}

/// A fitted model together with its calibrated threshold.
#[derive(Debug, Clone)]
pub struct SplitConformal<P> {
    model: P,
    score_fn: ScoreFunction,
    level: ConfidenceLevel,
    threshold: f64,
}

impl<P: Predictor> SplitConformal<P> {
    pub fn calibrate(
        model: P,
        cal: &Dataset,
        score_fn: ScoreFunction,
        level: ConfidenceLevel,
    ) -> Result<Self> {
        let threshold = calibrate(cal, &model, score_fn, level)?;
        Ok(Self {
            model,
            score_fn,
            level,
            threshold,
        })
    }

    /// Trains on `split.train` and calibrates on `split.cal`.
    pub fn fit<L>(
        learner: &L,
        split: &SplitDataset,
        score_fn: ScoreFunction,
        level: ConfidenceLevel,
    ) -> Result<Self>
    where
        L: Learner<Model = P>,
    {
        let model = learner.fit(&split.train)?;
        Self::calibrate(model, &split.cal, score_fn, level)
    }

    pub fn predict(&self, x: &[f64]) -> Result<PredictionInterval> {
        predict_interval(x, &self.model, self.score_fn, self.threshold)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn level(&self) -> ConfidenceLevel {
        self.level
    }

    pub fn score_fn(&self) -> ScoreFunction {
        self.score_fn
    }

    pub fn model(&self) -> &P {
        &self.model
    }
}
