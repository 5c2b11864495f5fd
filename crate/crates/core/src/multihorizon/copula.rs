use super::HorizonScores;
use crate::error::{ConformalError, Result};
use crate::exchangeable::{empirical_quantile, ScoreSet};

/// Right-continuous step CDF `F(s) = #{s_i <= s} / n` over one horizon's scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    scores: ScoreSet,
}

impl EmpiricalCdf {
    pub fn new(scores: ScoreSet) -> Result<Self> {
        if scores.is_empty() {
            return Err(ConformalError::EmptyCalibration);
        }
        Ok(Self { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.scores.count_le(s) as f64 / self.scores.len() as f64
    }

    /// Smallest observed score with `F(s) >= level`; `+inf` above level 1.
    pub fn inverse(&self, level: f64) -> Result<f64> {
        if level > 1.0 {
            return Ok(f64::INFINITY);
        }
        empirical_quantile(level, &self.scores, false)
    }

    /// The `j`-th smallest score (1-based); `j = n + 1` maps to `+inf`.
    pub fn order_stat(&self, j: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.len() + 1);
        self.scores
            .sorted()
            .get(j - 1)
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    pub fn scores(&self) -> &ScoreSet {
        &self.scores
    }
}

/// A `k`-dimensional copula.
///
/// Coordinates are probabilities in `[0, 1]`; a coordinate of `+inf` marks a
/// step left unconstrained (an infinite score threshold).
pub trait Copula {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64]) -> Result<f64>;
}

fn check_point(u: &[f64], k: usize) -> Result<()> {
    if u.len() != k {
        return Err(ConformalError::DimensionMismatch {
            expected: k,
            got: u.len(),
        });
    }
    match u
        .iter()
        .find(|v| !((0.0..=1.0).contains(*v) || **v == f64::INFINITY))
    {
        Some(v) => Err(ConformalError::InvalidLevel {
            value: *v,
            range: "[0, 1] or +inf",
        }),
        None => Ok(()),
    }
}

/// `C(u) = (1/n) Σ_i Π_t 1[u^i_t < u_t]` over the calibration rank matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCopula {
    u_matrix: Vec<Vec<f64>>,
    k: usize,
}

impl EmpiricalCopula {
    /// Builds `u^i_t = F_t(s^i_t)` from the same scores that define the marginals.
    pub fn from_scores(hs: &HorizonScores) -> Result<Self> {
        let cdfs = hs
            .sets()
            .iter()
            .map(|s| EmpiricalCdf::new(s.clone()))
            .collect::<Result<Vec<_>>>()?;
        let u = hs
            .rows()
            .iter()
            .map(|row| row.iter().zip(&cdfs).map(|(s, f)| f.eval(*s)).collect())
            .collect();
        Self::from_u_matrix(u)
    }

    pub fn from_u_matrix(u_matrix: Vec<Vec<f64>>) -> Result<Self> {
        let k = u_matrix.first().map_or(0, Vec::len);
        if u_matrix.is_empty() || k == 0 {
            return Err(ConformalError::EmptyCalibration);
        }
        for row in &u_matrix {
            if row.len() != k {
                return Err(ConformalError::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(ConformalError::InvalidLevel {
                    value: row
                        .iter()
                        .copied()
                        .find(|v| !(0.0..=1.0).contains(v))
                        .unwrap_or(f64::NAN),
                    range: "[0, 1]",
                });
            }
        }
        Ok(Self { u_matrix, k })
    }

    pub fn u_matrix(&self) -> &[Vec<f64>] {
        &self.u_matrix
    }

    pub fn n_cal(&self) -> usize {
        self.u_matrix.len()
    }
}

impl Copula for EmpiricalCopula {
    fn dim(&self) -> usize {
        self.k
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        check_point(u, self.k)?;
        let hits = self
            .u_matrix
            .iter()
            .filter(|row| row.iter().zip(u).all(|(ui, ut)| ui < ut))
            .count();
        Ok(hits as f64 / self.u_matrix.len() as f64)
    }
}

/// Independence copula `Π u_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductCopula(pub usize);

impl Copula for ProductCopula {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        check_point(u, self.0)?;
        Ok(u.iter().map(|v| v.min(1.0)).product())
    }
}

/// Pointwise envelope `(max{1 - k + Σu, 0}, min u)` shared by every copula.
pub fn frechet_bounds(u: &[f64]) -> (f64, f64) {
    let k = u.len() as f64;
    let lower = (1.0 - k + u.iter().sum::<f64>()).max(0.0);
    let upper = u.iter().copied().fold(f64::INFINITY, f64::min);
    (lower, upper)
}
