use super::linear::{standardize, LinearModel};
use crate::error::{ConformalError, Result};
use crate::exchangeable::{empirical_quantile, ScoreSet};

const ITERATIONS: usize = 4000;
const BASE_STEP: f64 = 0.5;

/// Pinball loss `ρ_γ(y - q)`.
pub fn pinball(gamma: f64, y: f64, q: f64) -> f64 {
    let r = y - q;
    if r >= 0.0 {
        gamma * r
    } else {
        (gamma - 1.0) * r
    }
}

/// Linear `gamma`-quantile regression for scalar targets by full-batch
/// subgradient descent on the pinball loss.
///
/// Features are standardized internally; the step at iteration `t` is
/// `0.5 * sd(y) / sqrt(t + 1)` and the returned parameters are the average
/// iterate over the second half of the run.
pub fn fit_linear_quantile(xs: &[&[f64]], ys: &[f64], gamma: f64) -> Result<LinearModel> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ConformalError::InvalidLevel {
            value: gamma,
            range: "(0, 1)",
        });
    }
    let n = xs.len();
    if n == 0 || ys.len() != n {
        return Err(ConformalError::InvalidParameter(
            "quantile regression needs matching nonempty x and y".into(),
        ));
    }
    let p = xs[0].len();
    let (mean, std) = standardize(xs);
    let z: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| (0..p).map(|j| (x[j] - mean[j]) / std[j]).collect())
        .collect();
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let y_sd = (ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-12);

    let mut b = empirical_quantile(gamma, &ScoreSet::new(ys.to_vec())?, false)?;
    let mut w = vec![0.0; p];
    let (mut b_avg, mut w_avg, mut n_avg) = (0.0, vec![0.0; p], 0usize);
    let mut grad_w = vec![0.0; p];
    for t in 0..ITERATIONS {
        let mut grad_b = 0.0;
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        for (zi, yi) in z.iter().zip(ys) {
            let r = yi - b - w.iter().zip(zi).map(|(a, v)| a * v).sum::<f64>();
            let g = if r > 0.0 {
                -gamma
            } else if r < 0.0 {
                1.0 - gamma
            } else {
                0.0
            };
            grad_b += g;
            for (gw, v) in grad_w.iter_mut().zip(zi) {
                *gw += g * v;
            }
        }
        let step = BASE_STEP * y_sd / ((t + 1) as f64).sqrt();
        b -= step * grad_b / n as f64;
        for (wj, gj) in w.iter_mut().zip(&grad_w) {
            *wj -= step * gj / n as f64;
        }
        if t >= ITERATIONS / 2 {
            b_avg += b;
            w_avg.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
            n_avg += 1;
        }
    }
    let b = b_avg / n_avg as f64;
    let w: Vec<f64> = w_avg.iter().map(|v| v / n_avg as f64).collect();
    let coef: Vec<f64> = (0..p).map(|j| w[j] / std[j]).collect();
    let intercept = b - (0..p).map(|j| coef[j] * mean[j]).sum::<f64>();
    Ok(LinearModel {
        intercept: vec![intercept],
        coef: vec![coef],
    })
}
