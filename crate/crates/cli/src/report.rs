//! Aggregate tables over a record store.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rulebench_core::aggregate::{
    self, csv_line, error_histogram, group_stats, metrics_table_csv, pass_at_k, variance_decomposition, AggregateError,
    ErrorHistogram, GroupKey, GroupStats, RunRecord, VarianceDecomposition,
};
use rulebench_core::metrics::Metric;
use rulebench_core::ErrorKind;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records under {0}")]
    EmptyStore(PathBuf),
    #[error(transparent)]
    Store(#[from] AggregateError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub group_by: Vec<GroupKey>,
    pub k: usize,
    pub decimals: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            group_by: vec![GroupKey::Model],
            k: 5,
            decimals: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassRow {
    pub model: String,
    pub temperature: String,
    pub records: usize,
    pub pass_at_1: f64,
    /// `None` when some query has fewer than k runs.
    pub pass_at_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub records: usize,
    pub valid: usize,
    pub group_by: Vec<GroupKey>,
    pub k: usize,
    pub overall: Vec<GroupStats>,
    pub by_asset: Vec<GroupStats>,
    pub by_level: Vec<GroupStats>,
    pub pass: Vec<PassRow>,
    pub errors: ErrorHistogram,
    pub variance: Vec<VarianceDecomposition>,
}

fn with(keys: &[GroupKey], extra: GroupKey) -> Vec<GroupKey> {
    let mut out = keys.to_vec();
    if !out.contains(&extra) {
        out.push(extra);
    }
    out
}

pub fn build(records: &[RunRecord], opts: &ReportOptions) -> Report {
    let mut pass = Vec::new();
    let mut pairs: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.model.clone(), r.temperature.clone()))
        .collect();
    pairs.sort();
    pairs.dedup();
    for (model, temperature) in pairs {
        let subset: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.model == model && r.temperature == temperature)
            .cloned()
            .collect();
        let ok = subset.iter().filter(|r| r.is_success()).count();
        pass.push(PassRow {
            records: subset.len(),
            pass_at_1: ok as f64 / subset.len() as f64,
            pass_at_k: pass_at_k(&subset, opts.k).ok().map(|p| p.pass_at_k),
            model,
            temperature,
        });
    }
    Report {
        records: records.len(),
        valid: records.iter().filter(|r| r.is_success()).count(),
        group_by: opts.group_by.clone(),
        k: opts.k,
        overall: group_stats(records, &opts.group_by),
        by_asset: group_stats(records, &with(&opts.group_by, GroupKey::Asset)),
        by_level: group_stats(records, &with(&opts.group_by, GroupKey::Level)),
        pass,
        errors: error_histogram(records),
        variance: Metric::TABLE
            .iter()
            .map(|&m| variance_decomposition(records, m))
            .collect(),
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.decimals$}"))
}

pub fn pass_csv(report: &Report, decimals: usize) -> String {
    let header = [
        "model",
        "temperature",
        "records",
        "pass@1",
        &format!("pass@{}", report.k),
    ];
    let mut out = csv_line(&header.map(String::from));
    for p in &report.pass {
        out.push_str(&csv_line(&[
            p.model.clone(),
            p.temperature.clone(),
            p.records.to_string(),
            opt(Some(p.pass_at_1), decimals),
            opt(p.pass_at_k, decimals),
        ]));
    }
    out
}

/// Error counts in the five reporting buckets per (model, temperature).
pub fn errors_csv(report: &Report) -> String {
    let mut header = vec!["model".to_string(), "temperature".to_string()];
    header.extend(ErrorKind::REPORTED.iter().map(|k| k.as_str().to_string()));
    header.push("total".into());
    let mut out = csv_line(&header);
    let mut row = |model: &str, temp: &str, counts: &std::collections::BTreeMap<ErrorKind, usize>| {
        let folded = ErrorHistogram::reported(counts);
        let mut fields = vec![model.to_string(), temp.to_string()];
        fields.extend(ErrorKind::REPORTED.iter().map(|k| folded[k].to_string()));
        fields.push(counts.values().sum::<usize>().to_string());
        out.push_str(&csv_line(&fields));
    };
    for r in &report.errors.rows {
        row(&r.model, &r.temperature, &r.counts);
    }
    row("all", "all", &report.errors.total);
    out
}

pub fn variance_csv(report: &Report, decimals: usize) -> String {
    let header = ["metric", "sigma2_run", "sigma2_query", "groups"].map(String::from);
    let mut out = csv_line(&header);
    for v in &report.variance {
        out.push_str(&csv_line(&[
            v.metric.label().to_string(),
            opt(v.sigma2_run, decimals),
            opt(v.sigma2_query, decimals),
            v.groups.to_string(),
        ]));
    }
    out
}

/// Loads `records_dir` and writes every table plus `summary.json` into `out_dir`.
pub fn write_report(records_dir: &Path, out_dir: &Path, opts: &ReportOptions) -> Result<Report, ReportError> {
    let records = if records_dir.is_dir() {
        aggregate::load_records(records_dir)?
    } else {
        Vec::new()
    };
    if records.is_empty() {
        return Err(ReportError::EmptyStore(records_dir.to_path_buf()));
    }
    let report = build(&records, opts);
    let write = |name: &str, text: String| {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|source| ReportError::Io { path, source })
    };
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let d = opts.decimals;
    write("overall.csv", metrics_table_csv(&report.overall, &opts.group_by, d))?;
    write(
        "by_asset.csv",
        metrics_table_csv(&report.by_asset, &with(&opts.group_by, GroupKey::Asset), d),
    )?;
    write(
        "by_level.csv",
        metrics_table_csv(&report.by_level, &with(&opts.group_by, GroupKey::Level), d),
    )?;
    write("pass.csv", pass_csv(&report, d))?;
    write("errors.csv", errors_csv(&report))?;
    write("variance.csv", variance_csv(&report, d))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write("summary.json", json + "\n")?;
    Ok(report)
}
