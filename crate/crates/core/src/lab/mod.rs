//! Baseline forecasters, synthetic data generators and evaluation metrics
//! for running the conformal methods end to end.

pub mod forecaster;
pub mod generate;
pub mod linear;
pub mod metrics;
pub mod quantile_reg;

pub use forecaster::{Forecaster, KnnScale, LinearDirect, Recipe};
pub use generate::{Changepoint, Generated, GeneratorModel, GeneratorSpec};
pub use linear::{least_squares, LinearModel};
pub use metrics::{
    coverage, joint_coverage, mean_width, miscoverage, rolling_coverage, spearman, Metrics,
};
