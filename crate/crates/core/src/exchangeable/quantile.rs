use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};

/// Slack absorbed when comparing a rank fraction `k / N` against a level `p`,
/// so that e.g. `0.9 * 10` resolves to rank 9 rather than 10.
const RANK_SLACK: f64 = 1e-9;

/// A multiset of finite nonconformity scores, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    sorted: Vec<f64>,
    horizon: Option<usize>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(ConformalError::NonFinite("score set"));
        }
        let mut sorted = scores;
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            sorted,
            horizon: None,
        })
    }

    pub fn with_horizon(mut self, h: usize) -> Self {
        self.horizon = Some(h);
        self
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Scores in ascending order.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of scores `<= s`.
    pub fn count_le(&self, s: f64) -> usize {
        self.sorted.partition_point(|&v| v <= s)
    }

    pub fn quantile(&self, p: f64, augment_with_infinity: bool) -> Result<f64> {
        empirical_quantile(p, self, augment_with_infinity)
    }
}

/// Smallest rank `k` in `1..=total` with `k / total >= p`.
pub fn rank_for_level(p: f64, total: usize) -> usize {
    let k = (p * total as f64 - RANK_SLACK).ceil().max(1.0) as usize;
    k.min(total)
}

/// Empirical `p`-quantile `inf{s : (1/N) #{s_i <= s} >= p}`.
///
/// With `augment_with_infinity` the set is treated as `scores ∪ {+inf}`, so
/// `N = n + 1` and the result is `+inf` whenever the required rank is `n + 1`.
pub fn empirical_quantile(p: f64, scores: &ScoreSet, augment_with_infinity: bool) -> Result<f64> {
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(ConformalError::InvalidLevel {
            value: p,
            range: "(0, 1]",
        });
    }
    let n = scores.len();
    let total = if augment_with_infinity { n + 1 } else { n };
    let k = rank_for_level(p, total);
    Ok(if k > n {
        f64::INFINITY
    } else {
        scores.sorted[k - 1]
    })
}
