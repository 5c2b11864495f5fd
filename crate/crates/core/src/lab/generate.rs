//! Seeded synthetic data. Every generator draws from a single ChaCha8 stream
//! seeded by `GeneratorSpec::seed`, so equal specs give equal output.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};
use crate::exchangeable::{Dataset, Row};
use crate::multihorizon::Trajectory;
use crate::safety::SafetyRecord;

/// A mean shift of a [`GeneratorModel::ShiftSeries`] taking effect at step `at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Changepoint {
    pub at: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorModel {
    /// `y = 1 + Σ_j x_j / (j+1) + noise·z`, `x ~ N(0, I)`.
    IidRegression { n: usize, dim: usize },
    /// `x ~ U(0, 5)`, `y = 2 + x + s(x)·z` with `s` from [`noise_scale`];
    /// a fraction `outlier_rate` of rows get five times the noise.
    Heteroscedastic { n: usize, outlier_rate: f64 },
    /// Stationary AR(1) started from its marginal law.
    Ar1 { n: usize, rho: f64 },
    /// AR(1) around a piecewise-constant mean.
    ShiftSeries {
        n: usize,
        rho: f64,
        #[serde(default)]
        changepoints: Vec<Changepoint>,
    },
    /// `n` damped-oscillator trajectories with `t` noiseless input steps and
    /// `k` noisy target steps whose noise shares a common factor with weight
    /// `correlation`.
    MultiHorizon {
        n: usize,
        t: usize,
        k: usize,
        correlation: f64,
    },
    /// `phi ~ N(1, 1)`, `phi_hat = phi + noise·z`, unsafe when `phi <= phi_0`.
    Safety { n: usize, phi_0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub model: GeneratorModel,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Rows(Dataset),
    /// Lag-1 rows `x = [s_{t-1}]`, `y = [s_t]` plus the raw values and the
    /// mean level in force at each step.
    Series {
        rows: Dataset,
        values: Vec<f64>,
        level: Vec<f64>,
    },
    /// Noisy trajectories and the noiseless targets they were built from.
    Trajectories {
        series: Vec<Trajectory>,
        clean: Vec<Vec<Vec<f64>>>,
    },
    Safety(Vec<SafetyRecord>),
}

impl Generated {
    /// Tabular rows for row-based methods; `None` for trajectories and safety records.
    pub fn rows(&self) -> Option<&Dataset> {
        match self {
            Generated::Rows(d) | Generated::Series { rows: d, .. } => Some(d),
            _ => None,
        }
    }
}

/// Standard deviation of the heteroscedastic noise at `x`.
pub fn noise_scale(noise: f64, x: f64) -> f64 {
    noise * (0.1 + 0.5 * x)
}

/// Oscillator frequency and damping ratio of the multi-horizon generator.
pub const OSCILLATOR_OMEGA: f64 = 0.6;
pub const OSCILLATOR_ZETA: f64 = 0.05;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(ConformalError::InvalidParameter(format!(
            "rho must lie in (-1, 1), got {rho}"
        )))
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(ConformalError::InvalidParameter(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            )));
        }
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(ConformalError::InvalidParameter(format!(
                    "{name} must be positive"
                )))
            } else {
                Ok(())
            }
        };
        match &self.model {
            GeneratorModel::IidRegression { n, dim } => {
                positive("n", *n)?;
                positive("dim", *dim)
            }
            GeneratorModel::Heteroscedastic { n, outlier_rate } => {
                positive("n", *n)?;
                if !(0.0..=1.0).contains(outlier_rate) {
                    return Err(ConformalError::InvalidParameter(format!(
                        "outlier_rate must lie in [0, 1], got {outlier_rate}"
                    )));
                }
                Ok(())
            }
            GeneratorModel::Ar1 { n, rho } => {
                positive("n", *n)?;
                check_rho(*rho)
            }
            GeneratorModel::ShiftSeries {
                n,
                rho,
                changepoints,
            } => {
                positive("n", *n)?;
                check_rho(*rho)?;
                if changepoints.iter().any(|c| !c.mean.is_finite()) {
                    return Err(ConformalError::NonFinite("changepoint mean"));
                }
                if changepoints.windows(2).any(|w| w[0].at >= w[1].at) {
                    return Err(ConformalError::InvalidParameter(
                        "changepoints must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            GeneratorModel::MultiHorizon {
                n,
                t,
                k,
                correlation,
            } => {
                positive("n", *n)?;
                positive("t", *t)?;
                positive("k", *k)?;
                if !(0.0..=1.0).contains(correlation) {
                    return Err(ConformalError::InvalidParameter(format!(
                        "correlation must lie in [0, 1], got {correlation}"
                    )));
                }
                Ok(())
            }
            GeneratorModel::Safety { n, phi_0 } => {
                positive("n", *n)?;
                if !phi_0.is_finite() {
                    return Err(ConformalError::NonFinite("phi_0"));
                }
                Ok(())
            }
        }
    }

    pub fn generate(&self) -> Result<Generated> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let rng = &mut rng;
        let noise = self.noise;
        Ok(match &self.model {
            GeneratorModel::IidRegression { n, dim } => {
                let rows = (0..*n)
                    .map(|_| {
                        let x: Vec<f64> = (0..*dim).map(|_| normal(rng)).collect();
                        let signal: f64 =
                            x.iter().enumerate().map(|(j, v)| v / (j + 1) as f64).sum();
                        let y = 1.0 + signal + noise * normal(rng);
                        Row { x, y: vec![y] }
                    })
                    .collect();
                Generated::Rows(Dataset::new(rows)?)
            }
            GeneratorModel::Heteroscedastic { n, outlier_rate } => {
                let rows = (0..*n)
                    .map(|_| {
                        let x = rng.random_range(0.0..5.0);
                        let outlier = rng.random_bool(*outlier_rate);
                        let s = noise_scale(noise, x) * if outlier { 5.0 } else { 1.0 };
                        Row {
                            y: vec![2.0 + x + s * normal(rng)],
                            x: vec![x],
                        }
                    })
                    .collect();
                Generated::Rows(Dataset::new(rows)?)
            }
            GeneratorModel::Ar1 { n, rho } => shifted_ar1(rng, *n, *rho, noise, &[])?,
            GeneratorModel::ShiftSeries {
                n,
                rho,
                changepoints,
            } => shifted_ar1(rng, *n, *rho, noise, changepoints)?,
            GeneratorModel::MultiHorizon {
                n,
                t,
                k,
                correlation,
            } => {
                let omega_d = OSCILLATOR_OMEGA * (1.0 - OSCILLATOR_ZETA.powi(2)).sqrt();
                let decay = OSCILLATOR_ZETA * OSCILLATOR_OMEGA;
                let (shared, own) = (correlation.sqrt(), (1.0 - correlation).sqrt());
                let mut series = Vec::with_capacity(*n);
                let mut clean = Vec::with_capacity(*n);
                for _ in 0..*n {
                    let amp = rng.random_range(0.5..2.0);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let s = |tau: usize| {
                        let tau = tau as f64;
                        amp * (-decay * tau).exp() * (omega_d * tau + phase).cos()
                    };
                    let inputs: Vec<Vec<f64>> = (0..*t).map(|i| vec![s(i)]).collect();
                    let truth: Vec<Vec<f64>> = (0..*k).map(|h| vec![s(t + h)]).collect();
                    let z0 = normal(rng);
                    let targets = truth
                        .iter()
                        .enumerate()
                        .map(|(h, v)| {
                            let sigma = ((h + 1) as f64).sqrt() * noise;
                            vec![v[0] + sigma * (shared * z0 + own * normal(rng))]
                        })
                        .collect();
                    series.push(Trajectory { inputs, targets });
                    clean.push(truth);
                }
                Generated::Trajectories { series, clean }
            }
            GeneratorModel::Safety { n, phi_0 } => Generated::Safety(
                (0..*n)
                    .map(|_| {
                        let phi = 1.0 + normal(rng);
                        SafetyRecord::new(phi, phi + noise * normal(rng), *phi_0)
                    })
                    .collect(),
            ),
        })
    }
}

fn shifted_ar1(
    rng: &mut ChaCha8Rng,
    n: usize,
    rho: f64,
    noise: f64,
    changepoints: &[Changepoint],
) -> Result<Generated> {
    let level_at = |t: usize| {
        changepoints
            .iter()
            .take_while(|c| c.at <= t)
            .last()
            .map_or(0.0, |c| c.mean)
    };
    let mut values = Vec::with_capacity(n + 1);
    let mut level = Vec::with_capacity(n + 1);
    let mut dev = noise / (1.0 - rho * rho).sqrt() * normal(rng);
    for t in 0..=n {
        if t > 0 {
            dev = rho * dev + noise * normal(rng);
        }
        let m = level_at(t);
        values.push(m + dev);
        level.push(m);
    }
    let rows = values
        .windows(2)
        .map(|w| Row {
            x: vec![w[0]],
            y: vec![w[1]],
        })
        .collect();
    Ok(Generated::Series {
        rows: Dataset::new(rows)?,
        values,
        level,
    })
}
