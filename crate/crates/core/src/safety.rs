//! Warning systems with a conformal detection guarantee.
//!
//! A state is unsafe when its safety score `phi` is at or below `phi_0`. The
//! warning system only sees a predicted score `phi_hat` and alerts when it is
//! at or below a calibrated threshold. Calibrating on the residuals
//! `phi_hat - phi` of unsafe records gives `P[alert | unsafe] >= 1 - epsilon`
//! for exchangeable records.

use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};
use crate::exchangeable::{empirical_quantile, ConfidenceLevel, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyRecord {
    pub phi: f64,
    pub phi_hat: f64,
    #[serde(rename = "unsafe")]
    pub is_unsafe: bool,
}

impl SafetyRecord {
    pub fn new(phi: f64, phi_hat: f64, phi_0: f64) -> Self {
        Self {
            phi,
            phi_hat,
            is_unsafe: phi <= phi_0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningSystem {
    pub alert_threshold: f64,
    pub epsilon: f64,
    pub phi_0: f64,
}

impl WarningSystem {
    /// Closed boundary: alerts when `phi_hat <= alert_threshold`.
    pub fn warn(&self, phi_hat: f64) -> bool {
        phi_hat <= self.alert_threshold
    }

    /// Threshold minus `phi_0`: the conformal quantile of the residuals.
    pub fn offset(&self) -> f64 {
        self.alert_threshold - self.phi_0
    }
}

pub fn calibrate_warning(
    cal: &[SafetyRecord],
    epsilon: ConfidenceLevel,
    phi_0: f64,
) -> Result<WarningSystem> {
    if !phi_0.is_finite() {
        return Err(ConformalError::NonFinite("phi_0"));
    }
    let residuals: Vec<f64> = cal
        .iter()
        .filter(|r| r.phi <= phi_0)
        .map(|r| r.phi_hat - r.phi)
        .collect();
    if residuals.is_empty() {
        return Err(ConformalError::NoUnsafeRecords);
    }
    let q = empirical_quantile(epsilon.coverage(), &ScoreSet::new(residuals)?, true)?;
    Ok(WarningSystem {
        alert_threshold: phi_0 + q,
        epsilon: epsilon.alpha(),
        phi_0,
    })
}

/// Empirical alert rates; a rate is `None` when its conditioning class is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningMetrics {
    pub detection_rate: Option<f64>,
    pub false_alert_rate: Option<f64>,
    pub n_unsafe: usize,
    pub n_safe: usize,
    pub alerts: usize,
}

pub fn evaluate_warning(ws: &WarningSystem, test: &[SafetyRecord]) -> Result<WarningMetrics> {
    if test.is_empty() {
        return Err(ConformalError::InvalidParameter("empty test set".into()));
    }
    let (mut tp, mut fp, mut n_unsafe, mut n_safe) = (0usize, 0usize, 0usize, 0usize);
    for r in test {
        let alert = ws.warn(r.phi_hat);
        if r.phi <= ws.phi_0 {
            n_unsafe += 1;
            tp += usize::from(alert);
        } else {
            n_safe += 1;
            fp += usize::from(alert);
        }
    }
    let rate = |hits: usize, total: usize| (total > 0).then(|| hits as f64 / total as f64);
    Ok(WarningMetrics {
        detection_rate: rate(tp, n_unsafe),
        false_alert_rate: rate(fp, n_safe),
        n_unsafe,
        n_safe,
        alerts: tp + fp,
    })
}
