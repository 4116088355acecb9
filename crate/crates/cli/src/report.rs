//! `report`: merges the tables and summaries of a run directory into one
//! JSON document without recomputing anything.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::commands::{write_json, DIAGNOSE_RUN, DIAGNOSE_SUMMARY, SEMICONV_RUN, SEMICONV_SUMMARY};
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

/// Tables every complete run directory holds (besides at least one `series_*.csv`).
pub const EXPECTED_TABLES: [&str; 8] =
    ["picard", "tsvd_curve", "ritz", "bidiag_diag", "filters", "sintheta", "ritz_check", "lagrange"];
pub const EXPECTED_SUMMARIES: [&str; 2] = [SEMICONV_RUN, DIAGNOSE_RUN];

#[derive(Debug, Clone, Serialize)]
pub struct TableJson {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub summaries: BTreeMap<String, Value>,
    pub tables: BTreeMap<String, TableJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub partial: bool,
    /// Paths relative to the report directory.
    pub missing: Vec<String>,
    pub aggregates: BTreeMap<String, Value>,
    pub runs: Vec<RunReport>,
}

/// Integers, floats and booleans become JSON scalars; anything else (`inf`,
/// `nan`) stays a string.
fn cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(b) = s.parse::<bool>() {
        return Value::from(b);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::from(s),
    }
}

pub fn read_table(path: &Path) -> Result<TableJson> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let columns = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?.iter().map(cell).collect());
    }
    Ok(TableJson { columns, rows })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

/// `seed_<n>` subdirectories ordered by seed, or the directory itself when
/// it has none.
fn run_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut runs: Vec<(u64, String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) {
            if entry.path().is_dir() {
                runs.push((seed, name, entry.path()));
            }
        }
    }
    runs.sort();
    if runs.is_empty() {
        return Ok(vec![(".".into(), dir.to_path_buf())]);
    }
    Ok(runs.into_iter().map(|(_, name, path)| (name, path)).collect())
}

fn run_report(name: &str, dir: &Path, missing: &mut Vec<String>) -> Result<RunReport> {
    let rel = |file: &str| if name == "." { file.to_string() } else { format!("{name}/{file}") };
    let mut tables = BTreeMap::new();
    for table in EXPECTED_TABLES {
        let path = dir.join(format!("{table}.csv"));
        if path.is_file() {
            tables.insert(table.to_string(), read_table(&path)?);
        } else {
            missing.push(rel(&format!("{table}.csv")));
        }
    }
    let mut series: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .is_some_and(|f| f.starts_with("series_") && f.ends_with(".csv"))
        })
        .collect();
    series.sort();
    if series.is_empty() {
        missing.push(rel("series_*.csv"));
    }
    for path in series {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        tables.insert(stem, read_table(&path)?);
    }
    let mut summaries = BTreeMap::new();
    for file in EXPECTED_SUMMARIES {
        let path = dir.join(file);
        if path.is_file() {
            summaries.insert(file.trim_end_matches(".json").to_string(), read_json(&path)?);
        } else {
            missing.push(rel(file));
        }
    }
    Ok(RunReport { name: name.to_string(), summaries, tables })
}

pub fn build_report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(CliError::Validation(format!("{} is not a directory", dir.display())));
    }
    let mut missing = Vec::new();
    let mut runs = Vec::new();
    for (name, path) in run_dirs(dir)? {
        runs.push(run_report(&name, &path, &mut missing)?);
    }
    let mut aggregates = BTreeMap::new();
    for file in [SEMICONV_SUMMARY, DIAGNOSE_SUMMARY] {
        let path = dir.join(file);
        if path.is_file() {
            aggregates.insert(file.trim_end_matches(".json").to_string(), read_json(&path)?);
        }
    }
    Ok(Report { schema_version: SCHEMA_VERSION, partial: !missing.is_empty(), missing, aggregates, runs })
}

pub fn cmd_report(dir: &Path) -> Result<Report> {
    let report = build_report(dir)?;
    write_json(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}
