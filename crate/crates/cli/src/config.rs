use std::path::PathBuf;

use clap::ValueEnum;
use conformal::lab::{GeneratorModel, GeneratorSpec, Recipe};
use conformal::multihorizon::CopulaSearch;
use conformal::online::{Aggregation, DEFAULT_GAMMA, DEFAULT_WINDOW};
use conformal::ScoreFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Split,
    Enbpi,
    Aci,
    Cfrnn,
    Copulacpts,
    Warning,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Split => "split",
            Method::Enbpi => "enbpi",
            Method::Aci => "aci",
            Method::Cfrnn => "cfrnn",
            Method::Copulacpts => "copulacpts",
            Method::Warning => "warning",
        }
    }

    pub fn is_multi_horizon(self) -> bool {
        matches!(self, Method::Cfrnn | Method::Copulacpts)
    }

    pub fn is_online(self) -> bool {
        matches!(self, Method::Enbpi | Method::Aci)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Generator(GeneratorSpec),
    /// CSV file; relative paths resolve against the config file's directory.
    Path(PathBuf),
}

/// One experiment. Fields that do not apply to `method` must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Target miscoverage (`epsilon` for multi-horizon and warning runs).
    #[serde(alias = "epsilon")]
    pub alpha: f64,
    pub data: DataSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Recipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreFunction>,
    /// Share of rows (or series) used for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    /// Share of rows (or series) used for calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_fraction: Option<f64>,
    /// Leading rows used to fit the model in online methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_len: Option<usize>,
    /// EnbPI ensemble size `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    /// EnbPI recalibration batch `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// ACI step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// ACI score window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Window of the rolling-coverage plot series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rolling_window: Option<usize>,
    /// Forecast horizon for multi-horizon methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Input steps fed to the direct multi-horizon forecaster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<CopulaSearch>,
    /// Safety threshold `phi_0` for warning runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_0: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

fn diag(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field: field.into(),
        message: message.into(),
    }
}

fn fraction_ok(v: f64) -> bool {
    v.is_finite() && v > 0.0 && v < 1.0
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.4;
pub const DEFAULT_CAL_FRACTION: f64 = 0.3;
pub const DEFAULT_WARNING_CAL_FRACTION: f64 = 0.5;
pub const DEFAULT_MODELS: usize = 20;
pub const DEFAULT_BATCH: usize = 1;
pub const DEFAULT_ROLLING_WINDOW: usize = 100;
pub const DEFAULT_LAGS: usize = 2;

impl ExperimentConfig {
    pub fn resolve_method(&self, cli: Option<Method>) -> Result<Method, Vec<Diagnostic>> {
        match (cli, self.method) {
            (Some(a), Some(b)) if a != b => Err(vec![diag(
                "method",
                format!(
                    "config says {} but the {} subcommand was used",
                    b.name(),
                    a.name()
                ),
            )]),
            (Some(m), _) | (None, Some(m)) => Ok(m),
            (None, None) => Err(vec![diag(
                "method",
                "missing; set it in the config or use a method subcommand",
            )]),
        }
    }

    /// Every problem with this config for `method`; empty when it can run.
    pub fn validate(&self, method: Method) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(diag(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.trials == 0 {
            out.push(diag("trials", "must be at least 1"));
        }
        let only = |out: &mut Vec<Diagnostic>, field: &str, set: bool, ok: bool, which: &str| {
            if set && !ok {
                out.push(diag(
                    field,
                    format!("only applies to {which}, not {}", method.name()),
                ));
            }
        };
        let mh = method.is_multi_horizon();
        only(&mut out, "k", self.k.is_some(), mh, "multi-horizon methods");
        only(
            &mut out,
            "lags",
            self.lags.is_some(),
            mh,
            "multi-horizon methods",
        );
        only(
            &mut out,
            "search",
            self.search.is_some(),
            method == Method::Copulacpts,
            "copulacpts",
        );
        only(
            &mut out,
            "models",
            self.models.is_some(),
            method == Method::Enbpi,
            "enbpi",
        );
        only(
            &mut out,
            "aggregation",
            self.aggregation.is_some(),
            method == Method::Enbpi,
            "enbpi",
        );
        only(
            &mut out,
            "batch",
            self.batch.is_some(),
            method == Method::Enbpi,
            "enbpi",
        );
        only(
            &mut out,
            "gamma",
            self.gamma.is_some(),
            method == Method::Aci,
            "aci",
        );
        only(
            &mut out,
            "window",
            self.window.is_some(),
            method == Method::Aci,
            "aci",
        );
        only(
            &mut out,
            "train_len",
            self.train_len.is_some(),
            method.is_online(),
            "enbpi and aci",
        );
        only(
            &mut out,
            "rolling_window",
            self.rolling_window.is_some(),
            method.is_online(),
            "enbpi and aci",
        );
        only(
            &mut out,
            "phi_0",
            self.phi_0.is_some(),
            method == Method::Warning,
            "warning",
        );
        only(
            &mut out,
            "model",
            self.model.is_some(),
            !mh && method != Method::Warning,
            "split, enbpi and aci",
        );
        only(
            &mut out,
            "score",
            self.score.is_some(),
            !mh && method != Method::Warning,
            "split, enbpi and aci",
        );
        only(
            &mut out,
            "train_fraction",
            self.train_fraction.is_some(),
            method == Method::Split || mh,
            "split and multi-horizon methods",
        );
        only(
            &mut out,
            "cal_fraction",
            self.cal_fraction.is_some(),
            !method.is_online(),
            "split, multi-horizon and warning methods",
        );

        if let Some(k) = self.k {
            if k == 0 {
                out.push(diag("k", "must be at least 1"));
            }
        }
        if self.lags == Some(0) {
            out.push(diag("lags", "must be at least 1"));
        }
        if self.models == Some(0) {
            out.push(diag("models", "B must be at least 1"));
        }
        if self.batch == Some(0) {
            out.push(diag("batch", "h must be at least 1"));
        }
        if self.window == Some(0) {
            out.push(diag("window", "must be at least 1"));
        }
        if self.rolling_window == Some(0) {
            out.push(diag("rolling_window", "must be at least 1"));
        }
        if self.train_len == Some(0) {
            out.push(diag("train_len", "must be at least 1"));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g >= 0.0) {
                out.push(diag("gamma", format!("step size must be >= 0, got {g}")));
            }
        }
        if let Some(p) = self.phi_0 {
            if !p.is_finite() {
                out.push(diag("phi_0", "must be finite"));
            }
        }
        for (field, v) in [
            ("train_fraction", self.train_fraction),
            ("cal_fraction", self.cal_fraction),
        ] {
            if let Some(v) = v {
                if !fraction_ok(v) {
                    out.push(diag(field, format!("must lie in (0, 1), got {v}")));
                }
            }
        }
        if method != Method::Warning {
            let train = self.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
            let cal = self.cal_fraction.unwrap_or(DEFAULT_CAL_FRACTION);
            if !method.is_online() && fraction_ok(train) && fraction_ok(cal) && train + cal >= 1.0 {
                out.push(diag(
                    "cal_fraction",
                    "train_fraction + cal_fraction must leave rows for testing",
                ));
            }
        }
        if let Some(score) = self.score {
            let model = self.model.as_ref();
            match score {
                ScoreFunction::Cqr if !matches!(model, Some(Recipe::LinearQuantile { .. })) => {
                    out.push(diag("score", "cqr needs a linear_quantile model"))
                }
                ScoreFunction::NormalizedResidual
                    if !matches!(model, Some(Recipe::Normalized { .. })) =>
                {
                    out.push(diag(
                        "score",
                        "normalized_residual needs a normalized model",
                    ))
                }
                _ => {}
            }
        }
        if matches!(self.model, Some(Recipe::LinearQuantile { .. }))
            && self.score != Some(ScoreFunction::Cqr)
        {
            out.push(diag(
                "model",
                "linear_quantile predicts a band; use score cqr",
            ));
        }
        if let DataSource::Generator(spec) = &self.data {
            if let Err(e) = spec.validate() {
                out.push(diag("data.generator", e.to_string()));
            }
            let fits = match (&spec.model, method) {
                (GeneratorModel::MultiHorizon { .. }, m) => m.is_multi_horizon(),
                (GeneratorModel::Safety { .. }, m) => m == Method::Warning,
                (_, m) => !m.is_multi_horizon() && m != Method::Warning,
            };
            if !fits {
                out.push(diag(
                    "data.generator",
                    format!("generator does not produce data for {}", method.name()),
                ));
            }
            if let (GeneratorModel::MultiHorizon { k: gk, .. }, Some(k)) = (&spec.model, self.k) {
                if *gk != k && k > 0 {
                    out.push(diag(
                        "k",
                        format!("generator horizon is {gk}, config asks for {k}"),
                    ));
                }
            }
        }
        if mh && self.k.is_none() && matches!(self.data, DataSource::Path(_)) {
            out.push(diag(
                "k",
                "required when multi-horizon data comes from a file",
            ));
        }
        out
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(DEFAULT_GAMMA)
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or(DEFAULT_WINDOW)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> ExperimentConfig {
        serde_json::from_str(json).unwrap()
    }

    const SPLIT: &str =
        r#"{"alpha":0.1,"data":{"generator":{"model":{"iid_regression":{"n":200,"dim":2}}}}}"#;

    #[test]
    fn valid_config_has_no_diagnostics() {
        assert!(parse(SPLIT).validate(Method::Split).is_empty());
    }

    #[test]
    fn bad_values_are_reported() {
        let mut c = parse(SPLIT);
        c.alpha = 1.0;
        let d = c.validate(Method::Split);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "alpha");

        let c = parse(
            r#"{"alpha":0.1,"gamma":-0.1,"data":{"generator":{"model":{"ar1":{"n":200,"rho":0.5}}}}}"#,
        );
        let d = c.validate(Method::Aci);
        assert!(d.iter().any(|d| d.field == "gamma"), "{d:?}");
    }

    #[test]
    fn fields_checked_against_method() {
        let mut c = parse(SPLIT);
        c.k = Some(3);
        assert!(c.validate(Method::Split).iter().any(|d| d.field == "k"));
        let c = parse(
            r#"{"alpha":0.1,"k":0,"data":{"generator":{"model":{"multi_horizon":{"n":50,"t":5,"k":3,"correlation":0.5}}}}}"#,
        );
        assert!(c.validate(Method::Cfrnn).iter().any(|d| d.field == "k"));
        assert!(parse(SPLIT)
            .validate(Method::Cfrnn)
            .iter()
            .any(|d| d.field == "data.generator"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"alpha":0.1,"bogus":1,"data":{"path":"x.csv"}}"#
        )
        .is_err());
    }

    #[test]
    fn subcommand_and_config_method_must_agree() {
        let mut c = parse(SPLIT);
        assert_eq!(c.resolve_method(Some(Method::Aci)), Ok(Method::Aci));
        assert!(c.resolve_method(None).is_err());
        c.method = Some(Method::Split);
        assert!(c.resolve_method(Some(Method::Aci)).is_err());
        assert_eq!(c.resolve_method(None), Ok(Method::Split));
    }
}
