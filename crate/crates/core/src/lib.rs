//! Distribution-free prediction intervals.
//!
//! - [`exchangeable`]: split conformal prediction with absolute, normalized and
//!   CQR nonconformity scores.
//! - [`online`]: single-series methods under distribution shift (EnbPI, ACI).
//! - [`multihorizon`]: joint regions over `k` future steps for datasets of
//!   exchangeable series (Bonferroni CF-RNN and empirical-copula CopulaCPTS).
//! - [`safety`]: warning systems with a conditional detection guarantee.
//! - [`lab`]: baseline forecasters, seeded synthetic generators and metrics.

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod exchangeable;
pub mod lab;
pub mod multihorizon;
pub mod online;
pub mod safety;

pub use error::{ConformalError, Result};
pub use exchangeable::{
    calibrate, empirical_quantile, predict_interval, score, split, ConfidenceLevel, Dataset,
    Learner, Prediction, PredictionInterval, Predictor, Row, ScoreFunction, ScoreSet,
    SplitConformal, SplitDataset,
};
