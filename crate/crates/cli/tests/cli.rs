use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn run(method: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(method)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|e| {
        panic!(
            "stderr is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    v["error"].clone()
}

const SPLIT: &str =
    r#"{"alpha":0.1,"seed":3,"data":{"generator":{"model":{"iid_regression":{"n":400,"dim":2}}}}}"#;
const ACI: &str = r#"{"alpha":0.1,"gamma":0.01,"window":50,"train_len":100,
  "data":{"generator":{"model":{"shift_series":{"n":400,"rho":0.5,"changepoints":[{"at":250,"mean":3.0}]}}}}}"#;
const CFRNN: &str = r#"{"epsilon":0.1,"k":3,"seed":2,
  "data":{"generator":{"model":{"multi_horizon":{"n":200,"t":8,"k":3,"correlation":0.8}},"noise":0.1}}}"#;

#[test]
fn split_metrics_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SPLIT);
    let out = dir.path().join("out");
    let r = run("split", &cfg, &out, &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let m = json_file(&out.join("metrics.json"));
    let cov = m["coverage"].as_f64().expect("coverage key");
    assert!((0.0..=1.0).contains(&cov));
    assert!(m["mean_width"].as_f64().unwrap() >= 0.0);
    let manifest = json_file(&out.join("manifest.json"));
    assert_eq!(manifest["method"], "split");
    assert_eq!(manifest["config"]["seed"], 3);
    assert!(manifest["library_version"].is_string());
    let intervals = std::fs::read_to_string(out.join("intervals.csv")).unwrap();
    assert!(intervals.starts_with("index,lo_1,hi_1,y_1,covered\n"));
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (method, json) in [("split", SPLIT), ("aci", ACI), ("cfrnn", CFRNN)] {
        let cfg = write_config(dir.path(), &format!("{method}.json"), json);
        let a = dir.path().join(format!("{method}_a"));
        let b = dir.path().join(format!("{method}_b"));
        assert!(run(method, &cfg, &a, &["--format", "json"])
            .status
            .success());
        assert!(run(method, &cfg, &b, &["--format", "json"])
            .status
            .success());
        for f in [
            "intervals.json",
            "metrics.json",
            "plot.csv",
            "manifest.json",
        ] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{method}/{f}"
            );
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SPLIT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("split", &cfg, &a, &[]).status.success());
    assert!(run("split", &cfg, &b, &["--seed", "99"]).status.success());
    assert_eq!(json_file(&b.join("manifest.json"))["config"]["seed"], 99);
    assert_ne!(
        std::fs::read(a.join("intervals.csv")).unwrap(),
        std::fs::read(b.join("intervals.csv")).unwrap()
    );
}

#[test]
fn zero_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &CFRNN.replace(r#""k":3,"seed""#, r#""k":0,"seed""#),
    );
    let r = run("cfrnn", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(2));
    let e = stderr_error(&r);
    assert_eq!(e["kind"], "config");
    assert!(e["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["field"] == "k"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &SPLIT.replace(r#""seed":3"#, r#""seed":3,"colour":1"#),
    );
    let r = run("split", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn missing_and_ragged_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"alpha":0.1,"data":{"path":"nowhere.csv"}}"#,
    );
    let r = run("split", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(stderr_error(&r)["kind"], "data");

    std::fs::write(
        dir.path().join("ragged.csv"),
        "series_id,t,x_1,y_1\na,0,1,\na,1,2,\na,2,,3\na,3,,4\nb,0,5,\nb,1,6,\nb,2,,7\n",
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"epsilon":0.1,"k":2,"data":{"path":"ragged.csv"}}"#,
    );
    let r = run("cfrnn", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn csv_input_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,x_1,y_1\n");
    for t in 0..300 {
        let x = (t as f64 * 0.37).sin();
        csv.push_str(&format!(
            "{t},{x},{}\n",
            2.0 * x + 0.1 * (t as f64 * 1.3).cos()
        ));
    }
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"alpha":0.2,"data":{"path":"d.csv"}}"#,
    );
    let r = run("split", &cfg, &dir.path().join("out"), &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn aci_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", ACI);
    let out = dir.path().join("out");
    assert!(run("aci", &cfg, &out, &[]).status.success());
    let plot = std::fs::read_to_string(out.join("plot.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("t,rolling_cov,alpha_t,target"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3], "0.9");
    assert_eq!(plot.lines().count(), 1 + 250 - 100 + 1);
}

#[test]
fn short_stream_gives_header_only_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &ACI.replace(
            r#""train_len":100"#,
            r#""train_len":100,"rolling_window":1000"#,
        ),
    );
    let out = dir.path().join("out");
    assert!(run("aci", &cfg, &out, &[]).status.success());
    assert_eq!(
        std::fs::read_to_string(out.join("plot.csv")).unwrap(),
        "t,rolling_cov,alpha_t,target\n"
    );
}

#[test]
fn multi_horizon_width_fan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CFRNN);
    let out = dir.path().join("out");
    assert!(run("copulacpts", &cfg, &out, &[]).status.success());
    let plot = std::fs::read_to_string(out.join("plot.csv")).unwrap();
    assert!(plot.starts_with("step,threshold,level,mean_width,min_width,max_width\n"));
    assert_eq!(plot.lines().count(), 4);
    let m = json_file(&out.join("metrics.json"));
    assert!(m["joint_coverage"].as_f64().is_some());
    assert_eq!(m["thresholds"].as_array().unwrap().len(), 3);
}

#[test]
fn trials_write_one_directory_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &SPLIT.replace(r#""seed":3"#, r#""seed":3,"trials":3"#),
    );
    let out = dir.path().join("out");
    assert!(run("split", &cfg, &out, &[]).status.success());
    for i in 0..3 {
        assert!(out.join(format!("trial_{i:03}/intervals.csv")).exists());
    }
    let m = json_file(&out.join("metrics.json"));
    assert_eq!(m["trials"].as_array().unwrap().len(), 3);
    assert!(m["mean"]["coverage"].as_f64().is_some());
    let seeds: Vec<u64> = json_file(&out.join("manifest.json"))["trials"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![3, 4, 5]);
}

fn validate(dir: &Path, json: &str, method: &str) -> (Option<i32>, Value) {
    let cfg = write_config(dir, "v.json", json);
    let r = bin()
        .args(["validate", "--method", method, "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    (r.status.code(), serde_json::from_slice(&r.stdout).unwrap())
}

#[test]
fn validate_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = validate(dir.path(), SPLIT, "split");
    assert_eq!(code, Some(0));
    assert_eq!(v["diagnostics"], serde_json::json!([]));

    let (code, v) = validate(
        dir.path(),
        &ACI.replace(r#""gamma":0.01"#, r#""gamma":-0.01"#),
        "aci",
    );
    assert_eq!(code, Some(2));
    assert_eq!(v["diagnostics"][0]["field"], "gamma");

    let (code, v) = validate(
        dir.path(),
        &SPLIT.replace(r#""alpha":0.1"#, r#""alpha":1"#),
        "split",
    );
    assert_eq!(code, Some(2));
    assert_eq!(v["diagnostics"][0]["field"], "alpha");
}

#[test]
fn subcommand_must_match_config_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &SPLIT.replace(r#""alpha""#, r#""method":"aci","alpha""#),
    );
    let r = run("split", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(r.status.code(), Some(2));
}
