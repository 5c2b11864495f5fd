use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};

/// An axis-aligned box `[lo, hi]` over the target dimensions.
///
/// Bounds may be infinite. The empty region (no target is admitted) is a
/// distinct state rather than a box with `lo > hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    lo: Vec<f64>,
    hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    empty: bool,
}

impl PredictionInterval {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(ConformalError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if let Some((l, h)) = lo
            .iter()
            .zip(&hi)
            .find(|(l, h)| l.partial_cmp(h).is_none_or(|o| o.is_gt()))
        {
            return Err(ConformalError::CrossedQuantiles { lo: *l, hi: *h });
        }
        Ok(Self {
            lo,
            hi,
            empty: false,
        })
    }

    pub fn scalar(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// `[center - half_width, center + half_width]` per dimension.
    pub fn symmetric(center: &[f64], half_width: &[f64]) -> Result<Self> {
        let lo = center.iter().zip(half_width).map(|(c, w)| c - w).collect();
        let hi = center.iter().zip(half_width).map(|(c, w)| c + w).collect();
        Self::new(lo, hi)
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            empty: false,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            lo: vec![f64::NAN; dim],
            hi: vec![f64::NAN; dim],
            empty: true,
        }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn is_bounded(&self) -> bool {
        !self.empty && self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    /// Closed-box membership.
    pub fn contains(&self, y: &[f64]) -> bool {
        !self.empty
            && y.len() == self.lo.len()
            && y.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Side lengths; zero for the empty region.
    pub fn widths(&self) -> Vec<f64> {
        if self.empty {
            return vec![0.0; self.lo.len()];
        }
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    /// Sum of side lengths (the plain width for scalar targets).
    pub fn width(&self) -> f64 {
        self.widths().iter().sum()
    }
}
