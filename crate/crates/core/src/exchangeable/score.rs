use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, PredictionInterval};
use crate::error::{ConformalError, Result};

/// What a fitted model reports at an input `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    /// Point forecast `ŷ(x)`.
    Point(Vec<f64>),
    /// Point forecast with an uncertainty scale `u(x) > 0`.
    Scaled { point: Vec<f64>, scale: f64 },
    /// Lower and upper conditional quantile estimates.
    Band { lo: Vec<f64>, hi: Vec<f64> },
}

impl Prediction {
    pub fn dim(&self) -> usize {
        match self {
            Prediction::Point(p) | Prediction::Scaled { point: p, .. } => p.len(),
            Prediction::Band { lo, .. } => lo.len(),
        }
    }

    /// Point forecast, or the band midpoint for quantile predictions.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Prediction::Point(p) | Prediction::Scaled { point: p, .. } => p.clone(),
            Prediction::Band { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Prediction::Point(_) => "point",
            Prediction::Scaled { .. } => "scaled",
            Prediction::Band { .. } => "quantile-band",
        }
    }
}

/// A fitted model. Prediction must be deterministic.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: &[f64]) -> Prediction {
        (**self).predict(x)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self, x: &[f64]) -> Prediction {
        (**self).predict(x)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn predict(&self, x: &[f64]) -> Prediction {
        (**self).predict(x)
    }
}

/// A training procedure producing a [`Predictor`].
pub trait Learner: Sync {
    type Model: Predictor;

    fn fit(&self, train: &Dataset) -> Result<Self::Model>;
}

/// Nonconformity score families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFunction {
    /// `|y - ŷ|`, the ∞-norm for vector targets.
    AbsoluteResidual,
    /// `|y - ŷ| / u(x)`.
    NormalizedResidual,
    /// `max{t_lo - y, y - t_hi}`; negative inside the band.
    Cqr,
}

impl ScoreFunction {
    fn name(self) -> &'static str {
        match self {
            ScoreFunction::AbsoluteResidual => "absolute-residual",
            ScoreFunction::NormalizedResidual => "normalized-residual",
            ScoreFunction::Cqr => "cqr",
        }
    }

    fn mismatch(self, p: &Prediction) -> ConformalError {
        ConformalError::PredictionMismatch {
            score: self.name(),
            prediction: p.kind(),
        }
    }

    pub fn score(self, y: &[f64], prediction: &Prediction) -> Result<f64> {
        if y.len() != prediction.dim() {
            return Err(ConformalError::DimensionMismatch {
                expected: prediction.dim(),
                got: y.len(),
            });
        }
        match (self, prediction) {
            (ScoreFunction::AbsoluteResidual, Prediction::Point(p))
            | (ScoreFunction::AbsoluteResidual, Prediction::Scaled { point: p, .. }) => {
                Ok(max_abs_diff(y, p))
            }
            (ScoreFunction::NormalizedResidual, Prediction::Scaled { point, scale }) => {
                check_scale(*scale)?;
                Ok(max_abs_diff(y, point) / scale)
            }
            (ScoreFunction::Cqr, Prediction::Band { lo, hi }) => {
                check_band(lo, hi)?;
                Ok(y.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (l, h))| (l - v).max(v - h))
                    .fold(f64::NEG_INFINITY, f64::max))
            }
            _ => Err(self.mismatch(prediction)),
        }
    }

    /// The region `{y : score(y) <= q}`.
    pub fn invert(self, prediction: &Prediction, q: f64) -> Result<PredictionInterval> {
        let dim = prediction.dim();
        if q.is_nan() {
            return Err(ConformalError::NonFinite("threshold"));
        }
        match (self, prediction) {
            (ScoreFunction::AbsoluteResidual, Prediction::Point(p))
            | (ScoreFunction::AbsoluteResidual, Prediction::Scaled { point: p, .. }) => {
                Ok(symmetric_or_degenerate(p, q))
            }
            (ScoreFunction::NormalizedResidual, Prediction::Scaled { point, scale }) => {
                check_scale(*scale)?;
                Ok(symmetric_or_degenerate(point, q * scale))
            }
            (ScoreFunction::Cqr, Prediction::Band { lo, hi }) => {
                check_band(lo, hi)?;
                if q == f64::INFINITY {
                    return Ok(PredictionInterval::unbounded(dim));
                }
                let new_lo: Vec<f64> = lo.iter().map(|l| l - q).collect();
                let new_hi: Vec<f64> = hi.iter().map(|h| h + q).collect();
                if new_lo.iter().zip(&new_hi).any(|(l, h)| l > h) {
                    return Ok(PredictionInterval::empty(dim));
                }
                PredictionInterval::new(new_lo, new_hi)
            }
            _ => Err(self.mismatch(prediction)),
        }
    }
}

/// Free-function form of [`ScoreFunction::score`].
pub fn score(score_fn: ScoreFunction, y: &[f64], prediction: &Prediction) -> Result<f64> {
    score_fn.score(y, prediction)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn symmetric_or_degenerate(center: &[f64], half: f64) -> PredictionInterval {
    if half == f64::INFINITY {
        PredictionInterval::unbounded(center.len())
    } else if half < 0.0 {
        PredictionInterval::empty(center.len())
    } else {
        PredictionInterval::symmetric(center, &vec![half; center.len()])
            .expect("nonnegative half-width")
    }
}

fn check_scale(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(ConformalError::DegenerateScale(u))
    }
}

fn check_band(lo: &[f64], hi: &[f64]) -> Result<()> {
    match lo.iter().zip(hi).find(|(l, h)| l > h) {
        Some((l, h)) => Err(ConformalError::CrossedQuantiles { lo: *l, hi: *h }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ScoreFunction::*;

    fn point(v: f64) -> Prediction {
        Prediction::Point(vec![v])
    }

    fn band(lo: f64, hi: f64) -> Prediction {
        Prediction::Band {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    #[test]
    fn documented_scores() {
        assert_eq!(AbsoluteResidual.score(&[3.0], &point(5.0)).unwrap(), 2.0);
        let scaled = Prediction::Scaled {
            point: vec![5.0],
            scale: 4.0,
        };
        assert_eq!(NormalizedResidual.score(&[3.0], &scaled).unwrap(), 0.5);
        assert_eq!(Cqr.score(&[7.0], &band(2.0, 6.0)).unwrap(), 1.0);
        assert_eq!(Cqr.score(&[4.0], &band(2.0, 6.0)).unwrap(), -2.0);
    }

    #[test]
    fn vector_absolute_uses_sup_norm() {
        let p = Prediction::Point(vec![0.0, 0.0, 0.0]);
        assert_eq!(AbsoluteResidual.score(&[1.0, -3.0, 2.0], &p).unwrap(), 3.0);
        let iv = AbsoluteResidual.invert(&p, 3.0).unwrap();
        assert_eq!(iv.lo(), &[-3.0, -3.0, -3.0]);
    }

    #[test]
    fn documented_inversions() {
        let iv = AbsoluteResidual.invert(&point(5.0), 2.0).unwrap();
        assert_eq!((iv.lo()[0], iv.hi()[0]), (3.0, 7.0));
        let iv = AbsoluteResidual.invert(&point(5.0), 0.0).unwrap();
        assert_eq!((iv.lo()[0], iv.hi()[0]), (5.0, 5.0));
        let iv = Cqr.invert(&band(2.0, 6.0), 1.0).unwrap();
        assert_eq!((iv.lo()[0], iv.hi()[0]), (1.0, 7.0));
        assert!(!AbsoluteResidual
            .invert(&point(5.0), f64::INFINITY)
            .unwrap()
            .is_bounded());
        assert!(Cqr.invert(&band(2.0, 6.0), -3.0).unwrap().is_empty());
    }

    #[test]
    fn error_paths() {
        let bad_scale = Prediction::Scaled {
            point: vec![1.0],
            scale: 0.0,
        };
        let err = NormalizedResidual.score(&[1.0], &bad_scale).unwrap_err();
        assert!(err.to_string().starts_with("degenerate uncertainty scale"));
        let err = Cqr.score(&[1.0], &band(3.0, 2.0)).unwrap_err();
        assert!(err.to_string().starts_with("crossed quantiles"));
        assert!(matches!(
            Cqr.score(&[1.0], &point(1.0)),
            Err(ConformalError::PredictionMismatch { .. })
        ));
        assert!(AbsoluteResidual.score(&[1.0, 2.0], &point(1.0)).is_err());
    }

    /// Exhaustive grid check of `y ∈ invert(q) <=> score(y) <= q`.
    #[test]
    fn score_interval_duality_on_grid() {
        let preds = [
            (AbsoluteResidual, point(5.0)),
            (
                NormalizedResidual,
                Prediction::Scaled {
                    point: vec![5.0],
                    scale: 2.0,
                },
            ),
            (Cqr, band(2.0, 6.0)),
        ];
        let grid: Vec<f64> = (-80..=120).map(|i| i as f64 * 0.125).collect();
        for (sf, p) in &preds {
            for q in [-3.0, -2.0, -0.5, 0.0, 0.25, 1.0, 2.5, f64::INFINITY] {
                let iv = sf.invert(p, q).unwrap();
                for &y in &grid {
                    assert_eq!(
                        iv.contains(&[y]),
                        sf.score(&[y], p).unwrap() <= q,
                        "{sf:?} q={q} y={y}"
                    );
                }
            }
        }
    }
}
