use serde::{Deserialize, Serialize};

use super::{Copula, EmpiricalCdf, EmpiricalCopula, HorizonScores};
use crate::error::{ConformalError, Result};
use crate::exchangeable::{empirical_quantile, ConfidenceLevel};

const TARGET_SLACK: f64 = 1e-12;

/// Per-step level `1 - alpha / k` of a Bonferroni split of `alpha` over `k` steps.
pub fn bonferroni_level(alpha: f64, k: usize) -> f64 {
    1.0 - alpha / k as f64
}

/// `ŝ_h = Q(1 - alpha/k, s_h ∪ {+inf})` for each step.
///
/// Small calibration sets can yield `+inf` thresholds: still valid, just
/// uninformative.
pub fn cfrnn_calibrate(hs: &HorizonScores, level: ConfidenceLevel) -> Result<Vec<f64>> {
    let p = bonferroni_level(level.alpha(), hs.horizon());
    hs.sets()
        .iter()
        .map(|s| empirical_quantile(p, s, true))
        .collect()
}

/// How [`copula_search`] walks the threshold grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaSearch {
    /// Bisection on a level `τ` shared by every step.
    #[default]
    SharedLevel,
    /// `SharedLevel`, then lower single steps round-robin while the joint
    /// target still holds. The result is minimal: no componentwise-smaller
    /// grid vector is feasible. Tuning `k` thresholds to the calibration
    /// copula costs roughly a point of out-of-sample joint coverage.
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaThresholds {
    /// `s*_1..s*_k`, each an observed score or `+inf`.
    pub thresholds: Vec<f64>,
    /// `F_t(s*_t)`, with `+inf` standing for an unconstrained step.
    pub levels: Vec<f64>,
    /// Copula value at `levels`.
    pub copula_value: f64,
    /// Shared-level rank found by the bisection (`n + 1` means `+inf`).
    pub shared_rank: usize,
    /// Some step needed an infinite threshold.
    pub unbounded: bool,
}

struct Grid<'a, C> {
    marginals: &'a [EmpiricalCdf],
    copula: &'a C,
    n: usize,
    target: f64,
}

impl<C: Copula> Grid<'_, C> {
    fn levels(&self, ranks: &[usize]) -> Vec<f64> {
        ranks
            .iter()
            .zip(self.marginals)
            .map(|(&j, f)| {
                if j > self.n {
                    f64::INFINITY
                } else {
                    f.eval(f.order_stat(j))
                }
            })
            .collect()
    }

    fn value(&self, ranks: &[usize]) -> Result<f64> {
        self.copula.eval(&self.levels(ranks))
    }

    fn feasible(&self, ranks: &[usize]) -> Result<bool> {
        Ok(self.value(ranks)? >= self.target - TARGET_SLACK)
    }
}

/// Searches per-step thresholds from the observed score grid (plus `+inf`)
/// with `C(F_1(s*_1), ..., F_k(s*_k)) >= 1 - epsilon`.
///
/// Every marginal must hold the same number of scores.
pub fn copula_search<C: Copula>(
    marginals: &[EmpiricalCdf],
    copula: &C,
    epsilon: ConfidenceLevel,
    strategy: CopulaSearch,
) -> Result<CopulaThresholds> {
    let k = marginals.len();
    if k == 0 {
        return Err(ConformalError::EmptyCalibration);
    }
    if copula.dim() != k {
        return Err(ConformalError::DimensionMismatch {
            expected: k,
            got: copula.dim(),
        });
    }
    let n = marginals[0].len();
    if let Some(f) = marginals.iter().find(|f| f.len() != n) {
        return Err(ConformalError::RaggedSeries(format!(
            "marginals hold {n} and {} scores",
            f.len()
        )));
    }
    let grid = Grid {
        marginals,
        copula,
        n,
        target: epsilon.coverage(),
    };

    if !grid.feasible(&vec![n + 1; k])? {
        return Err(ConformalError::Numeric(
            "copula stays below target even with unbounded thresholds".into(),
        ));
    }
    let (mut lo, mut hi) = (1, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if grid.feasible(&vec![mid; k])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let shared_rank = lo;
    let mut ranks = vec![shared_rank; k];

    if strategy == CopulaSearch::Refined {
        loop {
            let mut changed = false;
            for t in 0..k {
                if ranks[t] == 1 {
                    continue;
                }
                ranks[t] -= 1;
                if grid.feasible(&ranks)? {
                    changed = true;
                } else {
                    ranks[t] += 1;
                }
            }
            if !changed {
                break;
            }
        }
    }

    let thresholds: Vec<f64> = ranks
        .iter()
        .zip(marginals)
        .map(|(&j, f)| f.order_stat(j))
        .collect();
    let unbounded = thresholds.iter().any(|s| s.is_infinite());
    if unbounded {
        log::warn!(
            "copula target {} unreachable with observed scores (n = {n}); using +inf thresholds",
            epsilon.coverage()
        );
    }
    Ok(CopulaThresholds {
        levels: grid.levels(&ranks),
        copula_value: grid.value(&ranks)?,
        thresholds,
        shared_rank,
        unbounded,
    })
}

/// Empirical-copula calibration: marginals and copula both come from `hs`.
pub fn copula_calibrate(
    hs: &HorizonScores,
    epsilon: ConfidenceLevel,
    strategy: CopulaSearch,
) -> Result<CopulaThresholds> {
    if hs.n_cal() < 2 {
        return Err(ConformalError::InvalidParameter(format!(
            "copula calibration needs at least 2 series, got {}",
            hs.n_cal()
        )));
    }
    let marginals = hs
        .sets()
        .iter()
        .map(|s| EmpiricalCdf::new(s.clone()))
        .collect::<Result<Vec<_>>>()?;
    let copula = EmpiricalCopula::from_scores(hs)?;
    copula_search(&marginals, &copula, epsilon, strategy)
}
