use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::StepRecord;
use crate::error::{ConformalError, Result};
use crate::exchangeable::{
    empirical_quantile, ConfidenceLevel, PredictionInterval, Predictor, Row, ScoreFunction,
    ScoreSet,
};

pub const DEFAULT_GAMMA: f64 = 0.005;
pub const DEFAULT_WINDOW: usize = 100;

/// Online miscoverage tracker `alpha_{t+1} = alpha_t + gamma (alpha - err_t)`.
///
/// Thresholds come from a sliding window of the most recent scores of a fixed
/// model. At `alpha_t <= 0` the region is the whole target space and at
/// `alpha_t >= 1` it is empty; [`AciState::update`] enforces the matching
/// coverage outcome, which keeps `alpha_t` inside `[-gamma, 1 + gamma]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AciState {
    alpha_t: f64,
    alpha_1: f64,
    gamma: f64,
    target: ConfidenceLevel,
    err_history: Vec<bool>,
    window_scores: VecDeque<f64>,
    window_size: usize,
}

/// Both sides of the long-run miscoverage bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AciBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl AciBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

impl AciState {
    /// Starts at `alpha_1 = target`.
    pub fn new(target: ConfidenceLevel, gamma: f64, window_size: usize) -> Result<Self> {
        Self::with_initial_alpha(target, gamma, window_size, target.alpha())
    }

    pub fn with_initial_alpha(
        target: ConfidenceLevel,
        gamma: f64,
        window_size: usize,
        alpha_1: f64,
    ) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(ConformalError::InvalidParameter(format!(
                "step size gamma must be >= 0, got {gamma}"
            )));
        }
        if window_size == 0 {
            return Err(ConformalError::InvalidParameter(
                "window size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&alpha_1) {
            return Err(ConformalError::InvalidLevel {
                value: alpha_1,
                range: "[0, 1]",
            });
        }
        Ok(Self {
            alpha_t: alpha_1,
            alpha_1,
            gamma,
            target,
            err_history: Vec::new(),
            window_scores: VecDeque::with_capacity(window_size),
            window_size,
        })
    }

    /// Seeds the score window, keeping only the newest `window_size` values.
    pub fn with_scores(mut self, scores: impl IntoIterator<Item = f64>) -> Self {
        for s in scores {
            self.push_score(s);
        }
        self
    }

    pub fn push_score(&mut self, s: f64) {
        self.window_scores.push_back(s);
        while self.window_scores.len() > self.window_size {
            self.window_scores.pop_front();
        }
    }

    /// Applies one step of the update and returns the recorded `err_t`.
    pub fn update(&mut self, covered: bool) -> bool {
        let err = if self.alpha_t <= 0.0 {
            false
        } else if self.alpha_t >= 1.0 {
            true
        } else {
            !covered
        };
        let e = if err { 1.0 } else { 0.0 };
        self.alpha_t += self.gamma * (self.target.alpha() - e);
        self.err_history.push(err);
        err
    }

    /// `Q_t(1 - alpha_t)`: `+inf` for `alpha_t <= 0`, `-inf` for `alpha_t >= 1`.
    pub fn threshold(&self) -> Result<f64> {
        if self.window_scores.is_empty() {
            return Err(ConformalError::EmptyCalibration);
        }
        if self.alpha_t <= 0.0 {
            return Ok(f64::INFINITY);
        }
        if self.alpha_t >= 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let scores = ScoreSet::new(self.window_scores.iter().copied().collect())?;
        empirical_quantile(1.0 - self.alpha_t, &scores, true)
    }

    pub fn interval<P: Predictor + ?Sized>(
        &self,
        x: &[f64],
        model: &P,
        score_fn: ScoreFunction,
    ) -> Result<PredictionInterval> {
        let q = self.threshold()?;
        let prediction = model.predict(x);
        if q == f64::NEG_INFINITY {
            return Ok(PredictionInterval::empty(prediction.dim()));
        }
        score_fn.invert(&prediction, q)
    }

    /// Predicts at `row.x`, observes `row.y`, updates `alpha_t` and slides the window.
    pub fn step<P: Predictor + ?Sized>(
        &mut self,
        t: usize,
        row: &Row,
        model: &P,
        score_fn: ScoreFunction,
    ) -> Result<StepRecord> {
        let alpha_t = self.alpha_t;
        let interval = self.interval(&row.x, model, score_fn)?;
        let err = self.update(interval.contains(&row.y));
        self.push_score(score_fn.score(&row.y, &model.predict(&row.x))?);
        Ok(StepRecord {
            t,
            interval,
            y: row.y.clone(),
            err,
            alpha_t,
        })
    }

    /// `|mean(err) - alpha|` against `(max{alpha_1, 1 - alpha_1} + gamma) / (gamma T)`.
    pub fn bound_check(&self) -> Option<AciBound> {
        let t = self.err_history.len();
        if t == 0 {
            return None;
        }
        let mean = self.err_history.iter().filter(|e| **e).count() as f64 / t as f64;
        let lhs = (mean - self.target.alpha()).abs();
        let rhs = (self.alpha_1.max(1.0 - self.alpha_1) + self.gamma) / (self.gamma * t as f64);
        Some(AciBound { lhs, rhs })
    }

    pub fn alpha_t(&self) -> f64 {
        self.alpha_t
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn target(&self) -> ConfidenceLevel {
        self.target
    }

    pub fn err_history(&self) -> &[bool] {
        &self.err_history
    }

    pub fn window_len(&self) -> usize {
        self.window_scores.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchangeable::Prediction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Zero;

    impl Predictor for Zero {
        fn predict(&self, _x: &[f64]) -> Prediction {
            Prediction::Point(vec![0.0])
        }
    }

    fn state(alpha_1: f64, gamma: f64) -> AciState {
        AciState::with_initial_alpha(ConfidenceLevel::new(0.1).unwrap(), gamma, 100, alpha_1)
            .unwrap()
    }

    #[test]
    fn single_updates() {
        let mut s = state(0.1, 0.01);
        s.update(true);
        assert!((s.alpha_t() - 0.101).abs() < 1e-15);
        let mut s = state(0.1, 0.01);
        s.update(false);
        assert!((s.alpha_t() - 0.091).abs() < 1e-15);
        let mut s = state(0.1, 0.0);
        for i in 0..1000 {
            s.update(i % 3 == 0);
        }
        assert_eq!(s.alpha_t(), 0.1);
        assert_eq!(s.err_history().len(), 1000);
    }

    #[test]
    fn boundary_regions() {
        let mut s = state(0.1, 0.01).with_scores((1..=9).map(f64::from));
        s.alpha_t = -0.05;
        let iv = s
            .interval(&[0.0], &Zero, ScoreFunction::AbsoluteResidual)
            .unwrap();
        assert!(!iv.is_bounded() && !iv.is_empty());
        assert!(!s.update(false), "alpha_t <= 0 always covers");

        s.alpha_t = 1.2;
        assert!(s
            .interval(&[0.0], &Zero, ScoreFunction::AbsoluteResidual)
            .unwrap()
            .is_empty());
        assert!(s.update(true), "alpha_t >= 1 always misses");

        s.alpha_t = 0.1;
        let iv = s
            .interval(&[0.0], &Zero, ScoreFunction::AbsoluteResidual)
            .unwrap();
        assert_eq!((iv.lo()[0], iv.hi()[0]), (-9.0, 9.0));
    }

    #[test]
    fn empty_window_errors() {
        let s = state(0.1, 0.01);
        assert_eq!(s.threshold(), Err(ConformalError::EmptyCalibration));
    }

    #[test]
    fn window_slides() {
        let mut s = state(0.1, 0.01).with_scores((0..250).map(f64::from));
        assert_eq!(s.window_len(), 100);
        s.push_score(-1.0);
        assert_eq!(s.window_len(), 100);
        assert_eq!(s.window_scores.front(), Some(&151.0));
    }

    #[test]
    fn bound_after_one_miss() {
        let mut s = state(0.1, 0.01);
        s.update(false);
        let b = s.bound_check().unwrap();
        assert!((b.lhs - 0.9).abs() < 1e-15);
        assert!((b.rhs - 91.0).abs() < 1e-9);
        assert!(b.holds());
        assert_eq!(state(0.1, 0.01).bound_check(), None);
    }

    #[test]
    fn all_covered_stream_respects_bound() {
        let mut s = state(0.1, 0.005);
        for _ in 0..10_000 {
            s.update(true);
            assert!(s.bound_check().unwrap().holds());
        }
    }

    #[test]
    fn bernoulli_errors_average_to_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = state(0.1, 0.0);
        for _ in 0..200_000 {
            s.update(!rng.random_bool(0.1));
        }
        // gamma = 0 keeps alpha_t fixed, so this is a plain Bernoulli(0.1) mean
        let mean = s.err_history().iter().filter(|e| **e).count() as f64 / 200_000.0;
        assert!((mean - 0.1).abs() < 0.005, "{mean}");
    }

    proptest::proptest! {
        #[test]
        fn bound_holds_for_any_bits(
            bits in proptest::collection::vec(proptest::bool::ANY, 1..2000),
            alpha_1 in 0.0f64..=1.0,
            gamma in 0.001f64..0.2,
        ) {
            let mut s = AciState::with_initial_alpha(ConfidenceLevel::new(0.1).unwrap(), gamma, 10, alpha_1).unwrap();
            for b in bits {
                s.update(b);
                proptest::prop_assert!(s.bound_check().unwrap().holds());
                proptest::prop_assert!(s.alpha_t() >= -gamma - 1e-12 && s.alpha_t() <= 1.0 + gamma + 1e-12);
            }
        }
    }
}
