//! Loading experiment data from a generator or a CSV file.
//!
//! Single-series CSV: `t, x_1..x_d, y_1..y_m`, one row per step.
//! Multi-series CSV: `series_id, t, x_1..x_d, y_1..y_m`; within a series,
//! input steps fill the `x` columns and leave `y` blank, target steps do the
//! reverse, and all inputs come before the targets.
//! Safety data uses the single-series layout with `x_1 = phi_hat`, `y_1 = phi`.

use std::path::Path;

use conformal::lab::{Generated, GeneratorSpec};
use conformal::multihorizon::Trajectory;
use conformal::safety::SafetyRecord;
use conformal::{Dataset, Row};

use crate::config::Method;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum Data {
    Rows(Dataset),
    Series {
        ids: Vec<String>,
        series: Vec<Trajectory>,
    },
    Safety(Vec<SafetyRecord>),
}

pub fn generate(spec: &GeneratorSpec) -> Result<Data, CliError> {
    Ok(match spec.generate()? {
        Generated::Rows(d) | Generated::Series { rows: d, .. } => Data::Rows(d),
        Generated::Trajectories { series, .. } => Data::Series {
            ids: (0..series.len()).map(|i| i.to_string()).collect(),
            series,
        },
        Generated::Safety(records) => Data::Safety(records),
    })
}

struct Columns {
    series_id: Option<usize>,
    t: usize,
    x: Vec<usize>,
    y: Vec<usize>,
}

/// Finds `prefix_1..prefix_n` in order; gaps are an error.
fn numbered(headers: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>, CliError> {
    let mut found: Vec<(usize, usize)> = Vec::new();
    for (col, name) in headers.iter().enumerate() {
        if let Some(n) = name
            .strip_prefix(prefix)
            .and_then(|s| s.parse::<usize>().ok())
        {
            found.push((n, col));
        }
    }
    found.sort_unstable();
    for (i, (n, _)) in found.iter().enumerate() {
        if *n != i + 1 {
            return Err(CliError::data(format!("column {prefix}{} missing", i + 1)));
        }
    }
    Ok(found.into_iter().map(|(_, c)| c).collect())
}

fn columns(headers: &csv::StringRecord, multi: bool) -> Result<Columns, CliError> {
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t = find("t").ok_or_else(|| CliError::data("missing column t"))?;
    let series_id = if multi {
        Some(find("series_id").ok_or_else(|| CliError::data("missing column series_id"))?)
    } else {
        None
    };
    let cols = Columns {
        series_id,
        t,
        x: numbered(headers, "x_")?,
        y: numbered(headers, "y_")?,
    };
    if cols.y.is_empty() {
        return Err(CliError::data("no y_ columns"));
    }
    Ok(cols)
}

fn cell(record: &csv::StringRecord, col: usize, line: u64) -> Result<Option<f64>, CliError> {
    let raw = record.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| CliError::data(format!("line {line}: '{raw}' is not a finite number")))
}

fn filled(
    record: &csv::StringRecord,
    cols: &[usize],
    line: u64,
) -> Result<Option<Vec<f64>>, CliError> {
    let vals = cols
        .iter()
        .map(|c| cell(record, *c, line))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.iter().all(Option::is_none) && !cols.is_empty() {
        return Ok(None);
    }
    vals.into_iter()
        .collect::<Option<Vec<f64>>>()
        .map(Some)
        .ok_or_else(|| CliError::data(format!("line {line}: partially filled row")))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn records(path: &Path, multi: bool) -> Result<(Columns, Vec<(u64, csv::StringRecord)>), CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    let cols = columns(&headers, multi)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        out.push((i as u64 + 2, rec));
    }
    Ok((cols, out))
}

/// Single-series rows, `t` strictly increasing.
pub fn read_rows(path: &Path) -> Result<Dataset, CliError> {
    let (cols, recs) = records(path, false)?;
    let mut rows = Vec::with_capacity(recs.len());
    let mut last_t = f64::NEG_INFINITY;
    for (line, rec) in &recs {
        let t = cell(rec, cols.t, *line)?
            .ok_or_else(|| CliError::data(format!("line {line}: empty t")))?;
        if t <= last_t {
            return Err(CliError::data(format!(
                "line {line}: t must be strictly increasing"
            )));
        }
        last_t = t;
        let x = if cols.x.is_empty() {
            Vec::new()
        } else {
            filled(rec, &cols.x, *line)?
                .ok_or_else(|| CliError::data(format!("line {line}: empty x")))?
        };
        let y = filled(rec, &cols.y, *line)?
            .ok_or_else(|| CliError::data(format!("line {line}: empty y")))?;
        rows.push(Row { x, y });
    }
    Ok(Dataset::new(rows)?)
}

pub fn read_series(path: &Path) -> Result<(Vec<String>, Vec<Trajectory>), CliError> {
    let (cols, recs) = records(path, true)?;
    let id_col = cols.series_id.expect("multi-series columns");
    let mut ids: Vec<String> = Vec::new();
    let mut series: Vec<Trajectory> = Vec::new();
    for (line, rec) in &recs {
        let id = rec.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(CliError::data(format!("line {line}: empty series_id")));
        }
        let idx = match ids.iter().position(|s| *s == id) {
            Some(i) if i + 1 == ids.len() => i,
            Some(_) => {
                return Err(CliError::data(format!(
                    "line {line}: rows of series {id} are not contiguous"
                )))
            }
            None => {
                ids.push(id.clone());
                series.push(Trajectory {
                    inputs: Vec::new(),
                    targets: Vec::new(),
                });
                ids.len() - 1
            }
        };
        let s = &mut series[idx];
        let x = filled(rec, &cols.x, *line)?;
        let y = filled(rec, &cols.y, *line)?;
        match (x, y) {
            (Some(x), None) if s.targets.is_empty() => s.inputs.push(x),
            (Some(_), None) => {
                return Err(CliError::data(format!(
                    "line {line}: input step after targets in series {id}"
                )))
            }
            (None, Some(y)) => s.targets.push(y),
            _ => {
                return Err(CliError::data(format!(
                    "line {line}: a step fills either the x or the y columns, not both or neither"
                )))
            }
        }
    }
    if series.is_empty() {
        return Err(CliError::data(format!("{}: no series", path.display())));
    }
    Ok((ids, series))
}

pub fn read_safety(path: &Path, phi_0: f64) -> Result<Vec<SafetyRecord>, CliError> {
    let rows = read_rows(path)?;
    if rows.feature_dim() != 1 || rows.target_dim() != 1 {
        return Err(CliError::data(
            "safety data needs exactly x_1 (phi_hat) and y_1 (phi)",
        ));
    }
    Ok(rows
        .rows()
        .iter()
        .map(|r| SafetyRecord::new(r.y[0], r.x[0], phi_0))
        .collect())
}

pub fn read(path: &Path, method: Method, phi_0: f64) -> Result<Data, CliError> {
    if !path.exists() {
        return Err(CliError::data(format!(
            "{}: file not found",
            path.display()
        )));
    }
    Ok(match method {
        m if m.is_multi_horizon() => {
            let (ids, series) = read_series(path)?;
            Data::Series { ids, series }
        }
        Method::Warning => Data::Safety(read_safety(path, phi_0)?),
        _ => Data::Rows(read_rows(path)?),
    })
}
