//! One trial of each method: data in, interval table, metrics and plot series out.

use conformal::lab::{rolling_coverage, LinearDirect, Recipe};
use conformal::multihorizon::{
    bonferroni_level, cfrnn_calibrate, collect_horizon_scores, copula_calibrate, predict_regions,
    HorizonForecaster, Trajectory,
};
use conformal::online::{AciState, EnbpiConfig, EnbpiState, StepRecord};
use conformal::safety::{calibrate_warning, evaluate_warning, SafetyRecord};
use conformal::{
    split, ConfidenceLevel, Dataset, PredictionInterval, ScoreFunction, SplitConformal,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::*;
use crate::data::Data;
use crate::error::CliError;
use crate::output::{Cell, Table};

pub struct TrialOutput {
    pub intervals: Table,
    pub metrics: Value,
    pub plot: Table,
    /// Effective parameters after defaults and data-dependent choices.
    pub params: Value,
}

fn level(alpha: f64) -> Result<ConfidenceLevel, CliError> {
    Ok(ConfidenceLevel::new(alpha)?)
}

fn wrong_data(method: Method) -> CliError {
    CliError::data(format!("data shape does not fit method {}", method.name()))
}

/// Number of elements for a fraction, at least one.
fn take(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).floor() as usize).max(1)
}

fn interval_cells(iv: &PredictionInterval) -> Vec<Cell> {
    if iv.is_empty() {
        return vec![Cell::Blank; 2 * iv.dim()];
    }
    iv.lo()
        .iter()
        .chain(iv.hi())
        .map(|v| Cell::Num(*v))
        .collect()
}

fn numbered(prefix: &str, m: usize) -> impl Iterator<Item = String> + '_ {
    (1..=m).map(move |j| format!("{prefix}_{j}"))
}

fn interval_header(first: &str, m: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(numbered("lo", m))
        .chain(numbered("hi", m))
        .chain(numbered("y", m))
        .chain(["covered".to_string()])
        .collect()
}

/// Width summary that keeps unbounded and empty regions out of the mean.
fn width_summary<'a>(intervals: impl Iterator<Item = &'a PredictionInterval>) -> Value {
    let (mut sum, mut n, mut unbounded, mut empty) = (0.0, 0usize, 0usize, 0usize);
    for iv in intervals {
        if iv.is_empty() {
            empty += 1;
        } else if !iv.is_bounded() {
            unbounded += 1;
        } else {
            sum += iv.width();
            n += 1;
        }
    }
    json!({
        "mean_width": if n > 0 { Some(sum / n as f64) } else { None },
        "n_unbounded": unbounded,
        "n_empty": empty,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn default_recipe(rows: &Dataset) -> Recipe {
    Recipe::LinearAr {
        order: rows.feature_dim().max(1),
    }
}

pub fn run_trial(
    method: Method,
    cfg: &ExperimentConfig,
    data: Data,
    seed: u64,
) -> Result<TrialOutput, CliError> {
    match (method, data) {
        (Method::Split, Data::Rows(d)) => run_split(cfg, &d, seed),
        (Method::Enbpi, Data::Rows(d)) => run_enbpi(cfg, &d, seed),
        (Method::Aci, Data::Rows(d)) => run_aci(cfg, &d),
        (Method::Cfrnn | Method::Copulacpts, Data::Series { ids, series }) => {
            run_multi_horizon(method, cfg, &ids, &series, seed)
        }
        (Method::Warning, Data::Safety(records)) => run_warning(cfg, records, seed),
        (m, _) => Err(wrong_data(m)),
    }
}

fn run_split(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<TrialOutput, CliError> {
    let tf = cfg.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
    let cf = cfg.cal_fraction.unwrap_or(DEFAULT_CAL_FRACTION);
    let first = split(data, tf, seed)?;
    let second = split(&first.cal, cf / (1.0 - tf), seed.wrapping_add(1))?;
    let (train, cal, test) = (first.train, second.train, second.cal);
    let recipe = cfg.model.clone().unwrap_or_else(|| default_recipe(data));
    let score_fn = cfg.score.unwrap_or(ScoreFunction::AbsoluteResidual);
    let model = recipe.fit(&train)?;
    let cp = SplitConformal::calibrate(model, &cal, score_fn, level(cfg.alpha)?)?;

    let m = data.target_dim();
    let mut intervals = Table::new(interval_header("index", m));
    let mut plot = Table::new(["index", "width", "covered"]);
    let mut ivs = Vec::with_capacity(test.len());
    let mut hits = 0usize;
    for (i, row) in test.rows().iter().enumerate() {
        let iv = cp.predict(&row.x)?;
        let covered = iv.contains(&row.y);
        hits += usize::from(covered);
        let mut cells = vec![Cell::Int(i)];
        cells.extend(interval_cells(&iv));
        cells.extend(row.y.iter().map(|v| Cell::Num(*v)));
        cells.push(covered.into());
        intervals.push(cells);
        plot.push(vec![i.into(), iv.width().into(), covered.into()]);
        ivs.push(iv);
    }
    let coverage = hits as f64 / test.len() as f64;
    let metrics = merge(
        json!({
            "coverage": coverage,
            "miscoverage": 1.0 - coverage,
            "threshold": cp.threshold(),
            "n_train": train.len(),
            "n_cal": cal.len(),
            "n_test": test.len(),
        }),
        width_summary(ivs.iter()),
    );
    let params = json!({
        "model": recipe,
        "score": score_fn,
        "train_fraction": tf,
        "cal_fraction": cf,
        "split_seeds": [seed, seed.wrapping_add(1)],
    });
    Ok(TrialOutput {
        intervals,
        metrics,
        plot,
        params,
    })
}

/// Train length for online methods: the configured value or half the series.
fn online_split(cfg: &ExperimentConfig, n: usize, extra: usize) -> Result<usize, CliError> {
    let train_len = cfg.train_len.unwrap_or(n / 2);
    if train_len < 2 || train_len + extra >= n {
        return Err(CliError::data(format!(
            "series of {n} rows is too short for {train_len} training rows plus {extra} window rows and a test stream"
        )));
    }
    Ok(train_len)
}

fn step_table(records: &[StepRecord], offset: usize, m: usize, with_alpha: bool) -> Table {
    let mut header = interval_header("t", m);
    if with_alpha {
        header.push("alpha_t".into());
    }
    let mut table = Table::new(header);
    for r in records {
        let mut cells = vec![Cell::Int(offset + r.t)];
        cells.extend(interval_cells(&r.interval));
        cells.extend(r.y.iter().map(|v| Cell::Num(*v)));
        cells.push((!r.err).into());
        if with_alpha {
            cells.push(r.alpha_t.into());
        }
        table.push(cells);
    }
    table
}

/// `t, rolling_cov, <extra>, target` rows for every full window.
fn rolling_table(
    records: &[StepRecord],
    offset: usize,
    window: usize,
    target: f64,
    extra: (&str, &dyn Fn(&StepRecord) -> f64),
) -> Table {
    let mut table = Table::new(["t", "rolling_cov", extra.0, "target"]);
    let errs: Vec<bool> = records.iter().map(|r| r.err).collect();
    if let Ok(roll) = rolling_coverage(&errs, window) {
        for (i, cov) in roll.into_iter().enumerate() {
            let r = &records[i + window - 1];
            table.push(vec![
                (offset + r.t).into(),
                cov.into(),
                (extra.1)(r).into(),
                target.into(),
            ]);
        }
    }
    table
}

fn online_metrics(records: &[StepRecord]) -> Value {
    let misses = records.iter().filter(|r| r.err).count();
    let miscoverage = misses as f64 / records.len().max(1) as f64;
    merge(
        json!({
            "coverage": 1.0 - miscoverage,
            "miscoverage": miscoverage,
            "n_test": records.len(),
        }),
        width_summary(records.iter().map(|r| &r.interval)),
    )
}

fn run_enbpi(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<TrialOutput, CliError> {
    let train_len = online_split(cfg, data.len(), 0)?;
    let recipe = cfg.model.clone().unwrap_or_else(|| default_recipe(data));
    let config = EnbpiConfig {
        models: cfg.models.unwrap_or(DEFAULT_MODELS),
        aggregation: cfg.aggregation.unwrap_or_default(),
        window: cfg.batch.unwrap_or(DEFAULT_BATCH),
        seed,
    };
    let lvl = level(cfg.alpha)?;
    let mut state = EnbpiState::fit(&data.slice(0..train_len), &recipe, config)?;
    let records = state.stream(&data.slice(train_len..data.len()), lvl)?;
    let rolling_window = cfg.rolling_window.unwrap_or(DEFAULT_ROLLING_WINDOW);
    let plot = rolling_table(
        &records,
        train_len,
        rolling_window,
        lvl.coverage(),
        ("width", &|r| r.interval.width()),
    );
    let metrics = merge(
        online_metrics(&records),
        json!({ "n_train": train_len, "loo_fallbacks": state.fallbacks() }),
    );
    Ok(TrialOutput {
        intervals: step_table(&records, train_len, data.target_dim(), false),
        metrics,
        plot,
        params: json!({
            "model": recipe,
            "models": config.models,
            "aggregation": config.aggregation,
            "batch": config.window,
            "bootstrap_seed": seed,
            "train_len": train_len,
            "rolling_window": rolling_window,
        }),
    })
}

fn run_aci(cfg: &ExperimentConfig, data: &Dataset) -> Result<TrialOutput, CliError> {
    let window = cfg.window();
    let train_len = online_split(cfg, data.len(), window)?;
    let recipe = cfg.model.clone().unwrap_or_else(|| default_recipe(data));
    let score_fn = cfg.score.unwrap_or(ScoreFunction::AbsoluteResidual);
    let model = recipe.fit(&data.slice(0..train_len))?;
    let seed_rows = data.slice(train_len..train_len + window);
    let scores = seed_rows
        .rows()
        .iter()
        .map(|r| score_fn.score(&r.y, &conformal::Predictor::predict(&model, &r.x)))
        .collect::<Result<Vec<f64>, _>>()?;
    let lvl = level(cfg.alpha)?;
    let mut state = AciState::new(lvl, cfg.gamma(), window)?.with_scores(scores);
    let start = train_len + window;
    let records = data.rows()[start..]
        .iter()
        .enumerate()
        .map(|(t, row)| state.step(t, row, &model, score_fn))
        .collect::<Result<Vec<_>, _>>()?;
    let rolling_window = cfg.rolling_window.unwrap_or(DEFAULT_ROLLING_WINDOW);
    let plot = rolling_table(
        &records,
        start,
        rolling_window,
        lvl.coverage(),
        ("alpha_t", &|r| r.alpha_t),
    );
    let bound = state
        .bound_check()
        .map(|b| json!({ "lhs": b.lhs, "rhs": b.rhs, "holds": b.holds() }));
    let metrics = merge(
        online_metrics(&records),
        json!({ "n_train": train_len, "final_alpha_t": state.alpha_t(), "bound": bound }),
    );
    Ok(TrialOutput {
        intervals: step_table(&records, start, data.target_dim(), true),
        metrics,
        plot,
        params: json!({
            "model": recipe,
            "score": score_fn,
            "gamma": cfg.gamma(),
            "window": window,
            "train_len": train_len,
            "rolling_window": rolling_window,
        }),
    })
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn run_multi_horizon(
    method: Method,
    cfg: &ExperimentConfig,
    ids: &[String],
    series: &[Trajectory],
    seed: u64,
) -> Result<TrialOutput, CliError> {
    let k = cfg.k.unwrap_or_else(|| series[0].horizon());
    if let Some((i, s)) = series.iter().enumerate().find(|(_, s)| s.horizon() != k) {
        return Err(CliError::data(format!(
            "series {} has {} target steps, expected k = {k}",
            ids[i],
            s.horizon()
        )));
    }
    let min_inputs = series.iter().map(|s| s.inputs.len()).min().unwrap_or(0);
    let lags = cfg.lags.unwrap_or(DEFAULT_LAGS.min(min_inputs));
    if lags == 0 || lags > min_inputs {
        return Err(CliError::data(format!(
            "every series needs at least {} input steps, shortest has {min_inputs}",
            lags.max(1)
        )));
    }
    let tf = cfg.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
    let cf = cfg.cal_fraction.unwrap_or(DEFAULT_CAL_FRACTION);
    let order = shuffled(series.len(), seed);
    let n_train = take(series.len(), tf);
    let n_cal = take(series.len(), cf);
    if n_train + n_cal >= series.len() {
        return Err(CliError::data(format!(
            "{} series cannot fill train, calibration and test sets",
            series.len()
        )));
    }
    let pick = |r: std::ops::Range<usize>| -> Vec<usize> { order[r].to_vec() };
    let (train_idx, cal_idx, test_idx) = (
        pick(0..n_train),
        pick(n_train..n_train + n_cal),
        pick(n_train + n_cal..series.len()),
    );
    let gather =
        |idx: &[usize]| -> Vec<Trajectory> { idx.iter().map(|i| series[*i].clone()).collect() };
    let model = LinearDirect::fit(&gather(&train_idx), lags)?;
    let score_fn = ScoreFunction::AbsoluteResidual;
    let hs = collect_horizon_scores(&gather(&cal_idx), &model, score_fn)?;
    let lvl = level(cfg.alpha)?;
    let search = cfg.search.unwrap_or_default();
    let (thresholds, levels, extra) = if method == Method::Cfrnn {
        let thr = cfrnn_calibrate(&hs, lvl)?;
        (thr, vec![bonferroni_level(cfg.alpha, k); k], json!({}))
    } else {
        let c = copula_calibrate(&hs, lvl, search)?;
        let extra = json!({ "copula_value": c.copula_value, "shared_rank": c.shared_rank, "unbounded": c.unbounded });
        (c.thresholds, c.levels, extra)
    };

    let m = series[0].targets[0].len();
    let mut header = vec!["series_id".to_string()];
    header.extend(interval_header("step", m));
    let mut intervals = Table::new(header);
    let mut step_widths: Vec<Vec<f64>> = vec![Vec::new(); k];
    let (mut joint_hits, mut step_hits) = (0usize, 0usize);
    for &i in &test_idx {
        let s = &series[i];
        let region = predict_regions(&s.inputs, &model, score_fn, &thresholds, cfg.alpha)?;
        let mut all = true;
        for (h, (iv, y)) in region.intervals.iter().zip(&s.targets).enumerate() {
            let covered = iv.contains(y);
            all &= covered;
            step_hits += usize::from(covered);
            step_widths[h].push(iv.width());
            let mut cells = vec![Cell::Text(ids[i].clone()), Cell::Int(h + 1)];
            cells.extend(interval_cells(iv));
            cells.extend(y.iter().map(|v| Cell::Num(*v)));
            cells.push(covered.into());
            intervals.push(cells);
        }
        joint_hits += usize::from(all);
    }
    let n_test = test_idx.len();
    let mut plot = Table::new([
        "step",
        "threshold",
        "level",
        "mean_width",
        "min_width",
        "max_width",
    ]);
    let mut total_width = 0.0;
    for (h, w) in step_widths.iter().enumerate() {
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        total_width += mean;
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        plot.push(vec![
            (h + 1).into(),
            thresholds[h].into(),
            levels[h].into(),
            mean.into(),
            lo.into(),
            hi.into(),
        ]);
    }
    let joint = joint_hits as f64 / n_test as f64;
    let metrics = merge(
        json!({
            "joint_coverage": joint,
            "coverage": step_hits as f64 / (n_test * k) as f64,
            "miscoverage": 1.0 - joint,
            "mean_total_width": total_width,
            "thresholds": thresholds,
            "levels": levels,
            "n_train": n_train,
            "n_cal": n_cal,
            "n_test": n_test,
        }),
        extra,
    );
    let mut params = json!({ "k": model.horizon(), "lags": lags, "train_fraction": tf, "cal_fraction": cf, "shuffle_seed": seed });
    if method == Method::Copulacpts {
        params["search"] = json!(search);
    }
    Ok(TrialOutput {
        intervals,
        metrics,
        plot,
        params,
    })
}

fn run_warning(
    cfg: &ExperimentConfig,
    records: Vec<SafetyRecord>,
    seed: u64,
) -> Result<TrialOutput, CliError> {
    let cf = cfg.cal_fraction.unwrap_or(DEFAULT_WARNING_CAL_FRACTION);
    let phi_0 = cfg.phi_0.unwrap_or(0.0);
    let records: Vec<SafetyRecord> = records
        .into_iter()
        .map(|r| SafetyRecord::new(r.phi, r.phi_hat, phi_0))
        .collect();
    let order = shuffled(records.len(), seed);
    let n_cal = take(records.len(), cf);
    if n_cal >= records.len() {
        return Err(CliError::data(format!(
            "{} records cannot fill calibration and test sets",
            records.len()
        )));
    }
    let cal: Vec<SafetyRecord> = order[..n_cal].iter().map(|i| records[*i]).collect();
    let test_idx = &order[n_cal..];
    let test: Vec<SafetyRecord> = test_idx.iter().map(|i| records[*i]).collect();
    let ws = calibrate_warning(&cal, level(cfg.alpha)?, phi_0)?;
    let wm = evaluate_warning(&ws, &test)?;
    let mut intervals = Table::new(["t", "phi_hat", "phi", "unsafe", "alert"]);
    let mut plot = Table::new(["t", "phi_hat", "phi", "alert_threshold"]);
    for (&i, r) in test_idx.iter().zip(&test) {
        intervals.push(vec![
            i.into(),
            r.phi_hat.into(),
            r.phi.into(),
            r.is_unsafe.into(),
            ws.warn(r.phi_hat).into(),
        ]);
        plot.push(vec![
            i.into(),
            r.phi_hat.into(),
            r.phi.into(),
            ws.alert_threshold.into(),
        ]);
    }
    let metrics = json!({
        "detection_rate": wm.detection_rate,
        "false_alert_rate": wm.false_alert_rate,
        "n_unsafe": wm.n_unsafe,
        "n_safe": wm.n_safe,
        "alerts": wm.alerts,
        "alert_threshold": ws.alert_threshold,
        "offset": ws.offset(),
        "n_cal": cal.len(),
        "n_test": test.len(),
    });
    Ok(TrialOutput {
        intervals,
        metrics,
        plot,
        params: json!({ "phi_0": phi_0, "cal_fraction": cf, "shuffle_seed": seed }),
    })
}
