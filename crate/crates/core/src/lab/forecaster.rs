use serde::{Deserialize, Serialize};

use super::linear::{least_squares, LinearModel};
use super::quantile_reg::fit_linear_quantile;
use crate::error::{ConformalError, Result};
use crate::exchangeable::{Dataset, Learner, Prediction, Predictor};
use crate::multihorizon::{HorizonForecaster, Trajectory};

const MIN_SCALE: f64 = 1e-6;

/// How to train a [`Forecaster`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Recipe {
    /// OLS with intercept on the first `order` features (lagged values for series).
    LinearAr { order: usize },
    /// Mean target of the `k` nearest training inputs.
    Knn { k: usize },
    /// Linear `lo` and `hi` conditional quantiles fitted on the pinball loss.
    LinearQuantile { lo: f64, hi: f64 },
    /// Training-set target mean.
    Constant,
    /// `base` point model with a k-NN mean-absolute-deviation scale `u(x)`.
    Normalized { base: Box<Recipe>, neighbors: usize },
}

/// A fitted baseline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forecaster {
    Linear {
        order: usize,
        model: LinearModel,
    },
    Knn {
        k: usize,
        xs: Vec<Vec<f64>>,
        ys: Vec<Vec<f64>>,
    },
    LinearQuantile {
        lo: LinearModel,
        hi: LinearModel,
    },
    Constant(Vec<f64>),
    Normalized {
        base: Box<Forecaster>,
        scale: KnnScale,
    },
}

/// `u(x)`: mean absolute training residual of the `k` nearest training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnScale {
    k: usize,
    xs: Vec<Vec<f64>>,
    abs_residuals: Vec<f64>,
}

impl KnnScale {
    pub fn fit(base: &Forecaster, train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(ConformalError::InvalidParameter(
                "neighbors must be positive".into(),
            ));
        }
        let (xs, abs_residuals) = train
            .rows()
            .iter()
            .map(|r| {
                let c = base.predict(&r.x).center();
                let res =
                    r.y.iter()
                        .zip(&c)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                (r.x.clone(), res)
            })
            .unzip();
        Ok(Self {
            k,
            xs,
            abs_residuals,
        })
    }

    pub fn scale(&self, x: &[f64]) -> f64 {
        let idx = nearest(&self.xs, x, self.k);
        let mean = idx.iter().map(|&i| self.abs_residuals[i]).sum::<f64>() / idx.len() as f64;
        mean.max(MIN_SCALE)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum()
}

/// Indices of the `k` nearest points, ties broken by index.
fn nearest(xs: &[Vec<f64>], x: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = xs
        .iter()
        .enumerate()
        .map(|(i, p)| (sq_dist(p, x), i))
        .collect();
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
    }
    d.into_iter().map(|(_, i)| i).collect()
}

fn refs(train: &Dataset) -> (Vec<&[f64]>, Vec<&[f64]>) {
    train
        .rows()
        .iter()
        .map(|r| (r.x.as_slice(), r.y.as_slice()))
        .unzip()
}

impl Recipe {
    pub fn fit(&self, train: &Dataset) -> Result<Forecaster> {
        if train.is_empty() {
            return Err(ConformalError::InvalidParameter(
                "empty training set".into(),
            ));
        }
        match self {
            Recipe::LinearAr { order } => {
                if *order == 0 || *order > train.feature_dim() {
                    return Err(ConformalError::InvalidParameter(format!(
                        "order {order} not in 1..={}",
                        train.feature_dim()
                    )));
                }
                let (xs, ys) = refs(train);
                let xs: Vec<&[f64]> = xs.iter().map(|x| &x[..*order]).collect();
                Ok(Forecaster::Linear {
                    order: *order,
                    model: least_squares(&xs, &ys)?,
                })
            }
            Recipe::Knn { k } => {
                if *k == 0 {
                    return Err(ConformalError::InvalidParameter(
                        "k must be positive".into(),
                    ));
                }
                let (xs, ys) = train
                    .rows()
                    .iter()
                    .map(|r| (r.x.clone(), r.y.clone()))
                    .unzip();
                Ok(Forecaster::Knn { k: *k, xs, ys })
            }
            Recipe::LinearQuantile { lo, hi } => {
                if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
                    return Err(ConformalError::InvalidParameter(format!(
                        "quantile levels must satisfy lo < hi, got {lo} and {hi}"
                    )));
                }
                if train.target_dim() != 1 {
                    return Err(ConformalError::DimensionMismatch {
                        expected: 1,
                        got: train.target_dim(),
                    });
                }
                let (xs, ys) = refs(train);
                let y: Vec<f64> = ys.iter().map(|v| v[0]).collect();
                Ok(Forecaster::LinearQuantile {
                    lo: fit_linear_quantile(&xs, &y, *lo)?,
                    hi: fit_linear_quantile(&xs, &y, *hi)?,
                })
            }
            Recipe::Constant => {
                let n = train.len() as f64;
                let mean = (0..train.target_dim())
                    .map(|j| train.rows().iter().map(|r| r.y[j]).sum::<f64>() / n)
                    .collect();
                Ok(Forecaster::Constant(mean))
            }
            Recipe::Normalized { base, neighbors } => {
                let base = base.fit(train)?;
                let scale = KnnScale::fit(&base, train, *neighbors)?;
                Ok(Forecaster::Normalized {
                    base: Box::new(base),
                    scale,
                })
            }
        }
    }
}

impl Learner for Recipe {
    type Model = Forecaster;

    fn fit(&self, train: &Dataset) -> Result<Forecaster> {
        Recipe::fit(self, train)
    }
}

impl Forecaster {
    /// Quantile band with crossings repaired by sorting each `(lo, hi)` pair.
    fn band(lo: &LinearModel, hi: &LinearModel, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (lo.predict(x), hi.predict(x));
        a.iter()
            .zip(&b)
            .map(|(l, h)| (l.min(*h), l.max(*h)))
            .unzip()
    }
}

impl Predictor for Forecaster {
    fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            Forecaster::Linear { order, model } => Prediction::Point(model.predict(&x[..*order])),
            Forecaster::Knn { k, xs, ys } => {
                let idx = nearest(xs, x, *k);
                let dim = ys[0].len();
                let mean = (0..dim)
                    .map(|j| idx.iter().map(|&i| ys[i][j]).sum::<f64>() / idx.len() as f64)
                    .collect();
                Prediction::Point(mean)
            }
            Forecaster::LinearQuantile { lo, hi } => {
                let (lo, hi) = Forecaster::band(lo, hi, x);
                Prediction::Band { lo, hi }
            }
            Forecaster::Constant(c) => Prediction::Point(c.clone()),
            Forecaster::Normalized { base, scale } => Prediction::Scaled {
                point: base.predict(x).center(),
                scale: scale.scale(x),
            },
        }
    }
}

/// Direct multi-step linear forecaster: one OLS model per horizon step on the
/// last `lags` input steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDirect {
    lags: usize,
    steps: Vec<LinearModel>,
}

fn lag_features(inputs: &[Vec<f64>], lags: usize) -> Vec<f64> {
    inputs[inputs.len() - lags..]
        .iter()
        .flatten()
        .copied()
        .collect()
}

impl LinearDirect {
    pub fn fit(train: &[Trajectory], lags: usize) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| ConformalError::InvalidParameter("empty training set".into()))?;
        let k = first.horizon();
        if lags == 0 || k == 0 {
            return Err(ConformalError::InvalidParameter(
                "lags and horizon must be positive".into(),
            ));
        }
        for (i, s) in train.iter().enumerate() {
            if s.inputs.len() < lags || s.horizon() != k {
                return Err(ConformalError::RaggedSeries(format!(
                    "series {i}: {} inputs / {} targets, need >= {lags} / {k}",
                    s.inputs.len(),
                    s.horizon()
                )));
            }
        }
        let feats: Vec<Vec<f64>> = train
            .iter()
            .map(|s| lag_features(&s.inputs, lags))
            .collect();
        let xs: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
        let steps = (0..k)
            .map(|h| {
                let ys: Vec<&[f64]> = train.iter().map(|s| s.targets[h].as_slice()).collect();
                least_squares(&xs, &ys)
            })
            .collect::<Result<_>>()?;
        Ok(Self { lags, steps })
    }

    pub fn lags(&self) -> usize {
        self.lags
    }
}

impl HorizonForecaster for LinearDirect {
    fn horizon(&self) -> usize {
        self.steps.len()
    }

    fn forecast(&self, inputs: &[Vec<f64>]) -> Vec<Prediction> {
        let x = lag_features(inputs, self.lags);
        self.steps
            .iter()
            .map(|m| Prediction::Point(m.predict(&x)))
            .collect()
    }
}
