use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};

/// `y = intercept + coef · x`, one row of `coef` per target dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: Vec<f64>,
    pub coef: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.intercept
            .iter()
            .zip(&self.coef)
            .map(|(b, w)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.coef.first().map_or(0, Vec::len)
    }
}

/// Ordinary least squares with intercept via the normal equations.
///
/// Falls back to a small ridge penalty (intercept unpenalized) when the
/// Gram matrix is not positive definite.
pub fn least_squares(xs: &[&[f64]], ys: &[&[f64]]) -> Result<LinearModel> {
    let n = xs.len();
    if n == 0 {
        return Err(ConformalError::InvalidParameter(
            "empty training set".into(),
        ));
    }
    let p = xs[0].len();
    let m = ys[0].len();
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { xs[i][j - 1] });
    let targets = DMatrix::from_fn(n, m, |i, j| ys[i][j]);
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * &targets;

    let solution = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            let scale = gram
                .diagonal()
                .iter()
                .skip(1)
                .copied()
                .fold(0.0, f64::max)
                .max(1.0);
            let lambda = 1e-8 * scale;
            log::warn!("singular least-squares design (n = {n}, p = {p}); ridge fallback lambda = {lambda:e}");
            let mut ridge = gram;
            for j in 1..=p {
                ridge[(j, j)] += lambda;
            }
            ridge
                .cholesky()
                .ok_or_else(|| {
                    ConformalError::Numeric("ridge system not positive definite".into())
                })?
                .solve(&rhs)
        }
    };
    Ok(LinearModel {
        intercept: (0..m).map(|j| solution[(0, j)]).collect(),
        coef: (0..m)
            .map(|j| (1..=p).map(|i| solution[(i, j)]).collect())
            .collect(),
    })
}

/// Column means and standard deviations (std floored at 1e-12).
pub(crate) fn standardize(xs: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let p = xs.first().map_or(0, |x| x.len());
    let mean: Vec<f64> = (0..p)
        .map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n)
        .collect();
    let std = (0..p)
        .map(|j| {
            let v = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            v.sqrt().max(1e-12)
        })
        .collect();
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, (i * i) as f64 * 0.1])
            .collect();
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| vec![2.0 - 3.0 * x[0] + 0.5 * x[1]])
            .collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let m = least_squares(&xr, &yr).unwrap();
        assert!((m.intercept[0] - 2.0).abs() < 1e-8);
        assert!((m.coef[0][0] + 3.0).abs() < 1e-8);
        assert!((m.coef[0][1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn collinear_design_uses_ridge() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![1.0 + x[0]]).collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let m = least_squares(&xr, &yr).unwrap();
        for x in &xs {
            assert!((m.predict(x)[0] - (1.0 + x[0])).abs() < 1e-4);
        }
    }
}
