use serde::{Deserialize, Serialize};

use crate::error::{ConformalError, Result};
use crate::exchangeable::PredictionInterval;

/// Summary statistics of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub coverage: f64,
    /// Only defined for multi-horizon runs.
    pub joint_coverage: Option<f64>,
    pub mean_width: f64,
    pub miscoverage: f64,
    pub rolling_coverage: Vec<f64>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(ConformalError::InvalidParameter(
            "no evaluation points".into(),
        ));
    }
    if a != b {
        return Err(ConformalError::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Fraction of `truths` inside their interval.
pub fn coverage(intervals: &[PredictionInterval], truths: &[Vec<f64>]) -> Result<f64> {
    check_lengths(intervals.len(), truths.len())?;
    let hits = intervals
        .iter()
        .zip(truths)
        .filter(|(iv, y)| iv.contains(y))
        .count();
    Ok(hits as f64 / intervals.len() as f64)
}

/// Fraction of trajectories whose every step lies in its interval.
pub fn joint_coverage<R: AsRef<[PredictionInterval]>>(
    regions: &[R],
    targets: &[Vec<Vec<f64>>],
) -> Result<f64> {
    check_lengths(regions.len(), targets.len())?;
    let mut hits = 0;
    for (r, ys) in regions.iter().zip(targets) {
        let r = r.as_ref();
        check_lengths(r.len(), ys.len())?;
        if r.iter().zip(ys).all(|(iv, y)| iv.contains(y)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / regions.len() as f64)
}

/// Mean of [`PredictionInterval::width`]; infinite if any interval is unbounded.
pub fn mean_width(intervals: &[PredictionInterval]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(ConformalError::InvalidParameter("no intervals".into()));
    }
    Ok(intervals.iter().map(PredictionInterval::width).sum::<f64>() / intervals.len() as f64)
}

/// Mean of the miss indicators.
pub fn miscoverage(errs: &[bool]) -> Result<f64> {
    if errs.is_empty() {
        return Err(ConformalError::InvalidParameter(
            "no evaluation points".into(),
        ));
    }
    Ok(errs.iter().filter(|e| **e).count() as f64 / errs.len() as f64)
}

/// Sliding mean of `1 - err` over every full window; `T - window + 1` values.
pub fn rolling_coverage(errs: &[bool], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > errs.len() {
        return Err(ConformalError::InvalidParameter(format!(
            "window must lie in 1..={}, got {window}",
            errs.len()
        )));
    }
    let mut covered = errs[..window].iter().filter(|e| !**e).count();
    let mut out = Vec::with_capacity(errs.len() - window + 1);
    out.push(covered as f64 / window as f64);
    for t in window..errs.len() {
        covered += usize::from(!errs[t]);
        covered -= usize::from(!errs[t - window]);
        out.push(covered as f64 / window as f64);
    }
    Ok(out)
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. `None` when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    check_lengths(a.len(), b.len())?;
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean).powi(2);
        vb += (y - mean).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (va * vb).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> PredictionInterval {
        PredictionInterval::scalar(lo, hi).unwrap()
    }

    #[test]
    fn coverage_extremes_and_hand_table() {
        let ivs: Vec<_> = (0..10).map(|i| iv(i as f64, i as f64 + 1.0)).collect();
        let inside: Vec<_> = (0..10).map(|i| vec![i as f64 + 0.5]).collect();
        let outside: Vec<_> = (0..10).map(|i| vec![i as f64 - 0.5]).collect();
        assert_eq!(coverage(&ivs, &inside).unwrap(), 1.0);
        assert_eq!(coverage(&ivs, &outside).unwrap(), 0.0);
        // hand table: endpoints count as covered
        let ys = [0.0, 2.5, 1.0, 3.0, 3.5, 7.0, 6.0, 7.2, 8.0, 11.5];
        let truths: Vec<_> = ys.iter().map(|y| vec![*y]).collect();
        let expected = ys
            .iter()
            .enumerate()
            .filter(|(i, y)| **y >= *i as f64 && **y <= *i as f64 + 1.0)
            .count();
        assert_eq!(expected, 5);
        assert_eq!(coverage(&ivs, &truths).unwrap(), 0.5);
        assert!(coverage(&ivs, &truths[..3]).is_err());
        assert!(coverage(&[], &[]).is_err());
    }

    #[test]
    fn joint_coverage_hand_table() {
        let region = vec![iv(0.0, 1.0), iv(0.0, 2.0), iv(-1.0, 3.0)];
        let regions = vec![region; 5];
        let t = |a: f64, b: f64, c: f64| vec![vec![a], vec![b], vec![c]];
        let targets = vec![
            t(0.5, 1.0, 0.0),
            t(1.5, 1.0, 0.0), // step 1 misses
            t(0.0, 2.0, 3.0),
            t(0.2, 2.1, 0.0),  // step 2 misses
            t(1.0, 0.0, -1.5), // step 3 misses
        ];
        assert_eq!(joint_coverage(&regions, &targets).unwrap(), 0.4);
    }

    #[test]
    fn joint_coverage_with_one_step_is_coverage() {
        let ivs: Vec<_> = (0..6).map(|i| iv(0.0, i as f64)).collect();
        let ys: Vec<Vec<f64>> = (0..6).map(|i| vec![2.5 + (i % 2) as f64]).collect();
        let regions: Vec<Vec<_>> = ivs.iter().map(|v| vec![v.clone()]).collect();
        let targets: Vec<Vec<Vec<f64>>> = ys.iter().map(|y| vec![y.clone()]).collect();
        assert_eq!(
            joint_coverage(&regions, &targets).unwrap(),
            coverage(&ivs, &ys).unwrap()
        );
    }

    #[test]
    fn rolling_hand_sequence() {
        // errs 1,0,0,1,0,0,0,1 with window 4
        let e = [true, false, false, true, false, false, false, true];
        assert_eq!(
            rolling_coverage(&e, 4).unwrap(),
            vec![0.5, 0.75, 0.75, 0.75, 0.75]
        );
        assert_eq!(
            rolling_coverage(&e, 8).unwrap(),
            vec![1.0 - miscoverage(&e).unwrap()]
        );
        assert_eq!(rolling_coverage(&[false; 6], 3).unwrap(), vec![1.0; 4]);
        assert!(rolling_coverage(&e, 0).is_err());
        assert!(rolling_coverage(&e, 9).is_err());
    }

    #[test]
    fn widths() {
        assert_eq!(mean_width(&[iv(0.0, 1.0), iv(0.0, 3.0)]).unwrap(), 2.0);
        assert_eq!(mean_width(&[PredictionInterval::empty(1)]).unwrap(), 0.0);
        assert!(mean_width(&[PredictionInterval::unbounded(1)])
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn spearman_known_values() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            spearman(&a, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap(),
            Some(1.0)
        );
        assert_eq!(
            spearman(&a, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(),
            Some(-1.0)
        );
        assert_eq!(spearman(&a, &[1.0; 5]).unwrap(), None);
        // 1 - 6Σd²/(n(n²-1)) with d = (0, 0, 1, -1, 0)
        let r = spearman(&a, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap().unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn coverage_is_permutation_invariant(
            pairs in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0, -6.0f64..6.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let ivs: Vec<_> = pairs.iter().map(|(l, w, _)| iv(*l, l + w)).collect();
            let ys: Vec<_> = pairs.iter().map(|(_, _, y)| vec![*y]).collect();
            let c = coverage(&ivs, &ys).unwrap();
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let ivs2: Vec<_> = order.iter().map(|&i| ivs[i].clone()).collect();
            let ys2: Vec<_> = order.iter().map(|&i| ys[i].clone()).collect();
            prop_assert_eq!(c, coverage(&ivs2, &ys2).unwrap());
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
