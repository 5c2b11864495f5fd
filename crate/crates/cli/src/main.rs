//! `conformal`: run one conformal method from a JSON config and write
//! intervals, metrics, plot series and a manifest.

mod config;
mod data;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conformal::lab::GeneratorModel;
use rayon::prelude::*;
use serde_json::{json, Value};

use config::{DataSource, Diagnostic, ExperimentConfig, Method};
use error::{CliError, Kind};
use output::{json_bytes, write_atomic, Format};

#[derive(Parser)]
#[command(
    name = "conformal",
    version,
    about = "Conformal prediction experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split conformal prediction on exchangeable rows.
    Split(RunArgs),
    /// Bootstrap-ensemble intervals streamed over a single series.
    Enbpi(RunArgs),
    /// Adaptive conformal inference over a single series.
    Aci(RunArgs),
    /// Bonferroni joint regions over k steps.
    Cfrnn(RunArgs),
    /// Empirical-copula joint regions over k steps.
    Copulacpts(RunArgs),
    /// Calibrated safety warning threshold.
    Warning(RunArgs),
    /// Check a config and print diagnostics as JSON.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "conformal-out")]
    out: PathBuf,
    /// Encoding of the intervals file.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Method to check against when the config does not name one.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn validate(args: &ValidateArgs) -> Vec<Diagnostic> {
    match load_config(&args.config) {
        Err(e) => vec![Diagnostic {
            field: "config".into(),
            message: e.message,
        }],
        Ok(cfg) => match cfg.resolve_method(args.method) {
            Err(d) => d,
            Ok(m) => cfg.validate(m),
        },
    }
}

struct Trial {
    index: usize,
    seed: u64,
    generator_seed: Option<u64>,
    dir: PathBuf,
    output: run::TrialOutput,
}

fn resolve_path(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn execute(method: Method, args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    let method = cfg
        .resolve_method(Some(method))
        .map_err(CliError::invalid)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let diagnostics = cfg.validate(method);
    if !diagnostics.is_empty() {
        return Err(CliError::invalid(diagnostics));
    }
    cfg.method = Some(method);
    if method == Method::Warning && cfg.phi_0.is_none() {
        if let DataSource::Generator(spec) = &cfg.data {
            if let GeneratorModel::Safety { phi_0, .. } = spec.model {
                cfg.phi_0 = Some(phi_0);
            }
        }
    }

    let file_data = match &cfg.data {
        DataSource::Path(p) => Some(data::read(
            &resolve_path(&args.config, p),
            method,
            cfg.phi_0.unwrap_or(0.0),
        )?),
        DataSource::Generator(_) => None,
    };
    let multi = cfg.trials > 1;
    let trials: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|index| {
            let seed = cfg.seed.wrapping_add(index as u64);
            let (dataset, generator_seed) = match (&cfg.data, &file_data) {
                (DataSource::Generator(spec), _) => {
                    let mut spec = spec.clone();
                    spec.seed = spec.seed.wrapping_add(seed);
                    (data::generate(&spec)?, Some(spec.seed))
                }
                (_, Some(d)) => (d.clone(), None),
                _ => unreachable!("file data is loaded up front"),
            };
            let output = run::run_trial(method, &cfg, dataset, seed)?;
            let dir = if multi {
                PathBuf::from(format!("trial_{index:03}"))
            } else {
                PathBuf::from(".")
            };
            Ok(Trial {
                index,
                seed,
                generator_seed,
                dir,
                output,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let intervals_name = format!("intervals.{}", args.format.extension());
    trials.par_iter().try_for_each(|t| {
        let dir = args.out.join(&t.dir);
        write_atomic(
            &dir.join(&intervals_name),
            &t.output.intervals.encode(args.format),
        )?;
        write_atomic(&dir.join("plot.csv"), &t.output.plot.to_csv())?;
        if multi {
            write_atomic(&dir.join("metrics.json"), &json_bytes(&t.output.metrics))?;
        }
        Ok::<_, CliError>(())
    })?;
    let metrics = if multi {
        summary(&trials)
    } else {
        trials[0].output.metrics.clone()
    };
    write_atomic(&args.out.join("metrics.json"), &json_bytes(&metrics))?;

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "library_version": conformal::VERSION,
        "method": method,
        "format": args.format,
        "config": cfg,
        "config_path": args.config,
        "trials": trials.iter().map(|t| json!({
            "trial": t.index,
            "seed": t.seed,
            "generator_seed": t.generator_seed,
            "dir": t.dir,
            "params": t.output.params,
        })).collect::<Vec<_>>(),
        "files": {
            "intervals": intervals_name,
            "plot": "plot.csv",
            "metrics": "metrics.json",
        },
    });
    write_atomic(&args.out.join("manifest.json"), &json_bytes(&manifest))?;
    log::info!("wrote {} trial(s) to {}", trials.len(), args.out.display());
    Ok(())
}

/// Per-trial metrics plus the mean of every numeric top-level key.
fn summary(trials: &[Trial]) -> Value {
    let per: Vec<&Value> = trials.iter().map(|t| &t.output.metrics).collect();
    let mut mean = serde_json::Map::new();
    if let Some(Value::Object(first)) = per.first() {
        for key in first.keys() {
            let vals: Option<Vec<f64>> = per
                .iter()
                .map(|m| m.get(key).and_then(Value::as_f64))
                .collect();
            if let Some(v) = vals {
                mean.insert(key.clone(), json!(v.iter().sum::<f64>() / v.len() as f64));
            }
        }
    }
    json!({
        "mean": mean,
        "trials": trials.iter().map(|t| json!({ "trial": t.index, "seed": t.seed, "metrics": t.output.metrics })).collect::<Vec<_>>(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (method, args) = match &cli.command {
        Command::Validate(args) => {
            let diagnostics = validate(args);
            println!("{}", json!({ "diagnostics": diagnostics }));
            return if diagnostics.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(Kind::Config.exit_code() as u8)
            };
        }
        Command::Split(a) => (Method::Split, a),
        Command::Enbpi(a) => (Method::Enbpi, a),
        Command::Aci(a) => (Method::Aci, a),
        Command::Cfrnn(a) => (Method::Cfrnn, a),
        Command::Copulacpts(a) => (Method::Copulacpts, a),
        Command::Warning(a) => (Method::Warning, a),
    };
    match execute(method, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
