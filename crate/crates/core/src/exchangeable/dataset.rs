use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};

/// One observation `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// An ordered collection of rows sharing feature and target dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Row>,
    feature_dim: usize,
    target_dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        let (feature_dim, target_dim) = match rows.first() {
            Some(r) => (r.x.len(), r.y.len()),
            None => (0, 0),
        };
        for r in &rows {
            if r.x.len() != feature_dim {
                return Err(ConformalError::DimensionMismatch {
                    expected: feature_dim,
                    got: r.x.len(),
                });
            }
            if r.y.len() != target_dim {
                return Err(ConformalError::DimensionMismatch {
                    expected: target_dim,
                    got: r.y.len(),
                });
            }
            if r.x.iter().chain(&r.y).any(|v| !v.is_finite()) {
                return Err(ConformalError::NonFinite("dataset row"));
            }
        }
        Ok(Self {
            rows,
            feature_dim,
            target_dim,
        })
    }

    /// Scalar-target convenience constructor.
    pub fn from_xy(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(ConformalError::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        Self::new(
            xs.into_iter()
                .zip(ys)
                .map(|(x, y)| Row { x, y: vec![y] })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            rows: self.rows[range].to_vec(),
            feature_dim: self.feature_dim,
            target_dim: self.target_dim,
        }
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            feature_dim: self.feature_dim,
            target_dim: self.target_dim,
        }
    }

    pub fn into_rows(self) -> Vec<Row> {
        self.rows
    }
}

/// Disjoint proper-training and calibration partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub cal: Dataset,
    pub seed: u64,
}

/// Seeded uniform shuffle followed by a cut at `floor(n * train_fraction)`.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ConformalError::InvalidLevel {
            value: train_fraction,
            range: "(0, 1)",
        });
    }
    let n = dataset.len();
    let m = (n as f64 * train_fraction).floor() as usize;
    if m == 0 || m >= n {
        return Err(ConformalError::EmptyPartition { n, train: m });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(SplitDataset {
        train: dataset.select(&idx[..m]),
        cal: dataset.select(&idx[m..]),
        seed,
    })
}
