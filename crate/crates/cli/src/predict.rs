//! `crr predict`: BRR and CRR intervals for the unlabelled rows of a CSV file.
//!
//! Input: a header `x1,…,xp,y`, then one observation per line. Rows with an
//! empty `y` are test rows; every labelled row is used for training.

use std::io::Write;
use std::path::Path;

use conformal_ridge::{brr_predict, crr_predict_with_fallback, Dataset, Error, Matrix, RidgeConfig};

use crate::error::{CliError, CliResult};

/// Grid used for the pointwise fallback when the analytic route refuses.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridSpec {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub steps: Option<usize>,
}

const DEFAULT_GRID_STEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct PredictInput {
    pub dim: usize,
    pub train: Dataset,
    /// `(line number, object)` for each test row.
    pub tests: Vec<(u64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictRow {
    pub line: u64,
    pub object: Vec<f64>,
    pub brr: Option<(f64, f64)>,
    pub crr: Option<(f64, f64)>,
    pub crr_method: &'static str,
    pub status: String,
}

fn parse_field(path: &Path, line: u64, name: &str, raw: &str) -> CliResult<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("column {name}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(CliError::parse(
            path,
            line,
            format!("column {name}: value must be finite"),
        ));
    }
    Ok(v)
}

pub fn read_input(path: &Path) -> CliResult<PredictInput> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let dim = names.len().saturating_sub(1);
    let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).chain(["y".to_string()]).collect();
    if dim == 0 || names != expected {
        return Err(CliError::parse(
            path,
            1,
            format!("header must be {}, got {}", expected.join(","), names.join(",")),
        ));
    }

    let mut objects = Vec::new();
    let mut labels = Vec::new();
    let mut tests = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let x = (0..dim)
            .map(|j| parse_field(path, line, &expected[j], &record[j]))
            .collect::<CliResult<Vec<f64>>>()?;
        let raw_y = record[dim].trim();
        if raw_y.is_empty() {
            tests.push((line, x));
        } else {
            labels.push(parse_field(path, line, "y", raw_y)?);
            objects.extend(x);
        }
    }
    if labels.is_empty() {
        return Err(CliError::parse(path, 1, "no labelled rows to train on"));
    }
    let train = Dataset::new(Matrix::new(labels.len(), dim, objects)?, labels)?;
    Ok(PredictInput { dim, train, tests })
}

fn fallback_grid(train: &Dataset, center: f64, spec: GridSpec) -> CliResult<Vec<f64>> {
    let (lo, hi) = train
        .labels()
        .iter()
        .fold((center, center), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let pad = 5.0 * (hi - lo + 1.0);
    let min = spec.min.unwrap_or(lo - pad);
    let max = spec.max.unwrap_or(hi + pad);
    let steps = spec.steps.unwrap_or(DEFAULT_GRID_STEPS);
    if !(min < max) || steps == 0 {
        return Err(CliError::Config(format!(
            "grid needs min < max and at least one step (got {min}..{max}, {steps} steps)"
        )));
    }
    let h = (max - min) / steps as f64;
    Ok((0..=steps).map(|i| min + i as f64 * h).collect())
}

pub fn predict_rows(input: &PredictInput, cfg: &RidgeConfig, grid: GridSpec) -> CliResult<Vec<PredictRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(input.tests.len());
    for (line, x) in &input.tests {
        let mut status = Vec::new();
        let brr = match brr_predict(&input.train, x, cfg) {
            Ok(iv) => Some((iv.lower, iv.upper)),
            Err(e) => {
                status.push(format!("brr: {e}"));
                None
            }
        };
        let center = brr.map_or(0.0, |(l, u)| 0.5 * (l + u));
        let grid = fallback_grid(&input.train, center, grid)?;
        let (crr, crr_method) = match crr_predict_with_fallback(&input.train, x, cfg.a, cfg.epsilon, &grid) {
            Ok(p) => (
                Some((p.interval.lower, p.interval.upper)),
                if p.grid_fallback.is_some() { "grid" } else { "analytic" },
            ),
            Err(e @ (Error::EmptyPredictionSet | Error::EmptyIntersection { .. })) => {
                status.push(format!("crr: {e}"));
                (None, "analytic")
            }
            Err(e) => {
                status.push(format!("crr: {e}"));
                (None, "")
            }
        };
        rows.push(PredictRow {
            line: *line,
            object: x.clone(),
            brr,
            crr,
            crr_method,
            status: if status.is_empty() {
                "ok".into()
            } else {
                status.join("; ")
            },
        });
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(out: W, dim: usize, rows: &[PredictRow]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["line".to_string()];
    header.extend((1..=dim).map(|j| format!("x{j}")));
    header.extend(
        [
            "brr_lower",
            "brr_upper",
            "crr_lower",
            "crr_upper",
            "crr_method",
            "status",
        ]
        .map(String::from),
    );
    writer.write_record(&header)?;
    let pair =
        |iv: Option<(f64, f64)>| iv.map_or([String::new(), String::new()], |(l, u)| [l.to_string(), u.to_string()]);
    for r in rows {
        let mut record = vec![r.line.to_string()];
        record.extend(r.object.iter().map(f64::to_string));
        record.extend(pair(r.brr));
        record.extend(pair(r.crr));
        record.push(r.crr_method.to_string());
        record.push(r.status.clone());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
