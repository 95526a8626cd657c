//! Run records and the statistics computed over many of them.
//!
//! Every aggregate sorts its inputs before summing, so shuffling the record
//! list never changes a result, not even in the last bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::ErrorKind;
use crate::metrics::{Metric, MetricsReport};

/// Label used for records that carry no level or grade.
pub const UNSTRATIFIED: &str = "unstratified";

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("group {group} has {have} runs, need {need}")]
    InsufficientRuns { group: String, have: usize, need: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad record {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// One backtest outcome of one generated strategy on one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub query: String,
    pub model: String,
    pub asset: String,
    #[serde(default)]
    pub level: Option<String>,
    #[serde(default)]
    pub grade: Option<String>,
    pub temperature: String,
    pub run: usize,
    pub status: ErrorKind,
    #[serde(default)]
    pub diagnostic: Option<String>,
    #[serde(default)]
    pub metrics: Option<MetricsReport>,
    #[serde(default)]
    pub equity: Vec<f64>,
    #[serde(default)]
    pub actions: Vec<i8>,
}

impl RunRecord {
    pub fn is_success(&self) -> bool {
        self.status.is_success()
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        self.metrics.as_ref().and_then(|r| r.get(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Model,
    Asset,
    Query,
    Temperature,
    Level,
    Grade,
}

impl GroupKey {
    pub fn parse(s: &str) -> Option<GroupKey> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "model" => GroupKey::Model,
            "asset" => GroupKey::Asset,
            "query" => GroupKey::Query,
            "temperature" | "temp" => GroupKey::Temperature,
            "level" => GroupKey::Level,
            "grade" => GroupKey::Grade,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Model => "model",
            GroupKey::Asset => "asset",
            GroupKey::Query => "query",
            GroupKey::Temperature => "temperature",
            GroupKey::Level => "level",
            GroupKey::Grade => "grade",
        }
    }

    pub fn label(self, r: &RunRecord) -> String {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| UNSTRATIFIED.to_string());
        match self {
            GroupKey::Model => r.model.clone(),
            GroupKey::Asset => r.asset.clone(),
            GroupKey::Query => r.query.clone(),
            GroupKey::Temperature => r.temperature.clone(),
            GroupKey::Level => opt(&r.level),
            GroupKey::Grade => opt(&r.grade),
        }
    }
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: Option<f64>,
    /// Sample std; 0 when only one value is defined.
    pub std: Option<f64>,
    pub count: usize,
    /// Valid records whose value for this metric is undefined.
    pub excluded: usize,
}

impl MetricStat {
    fn from_values(values: Vec<f64>, excluded: usize) -> MetricStat {
        let values = sorted(values);
        let count = values.len();
        MetricStat {
            mean: (count > 0).then(|| mean(&values)),
            std: match count {
                0 => None,
                1 => Some(0.0),
                _ => Some(sample_var(&values).sqrt()),
            },
            count,
            excluded,
        }
    }

    /// `mean ± std`, or `n/a` when no value is defined.
    pub fn cell(&self, decimals: usize) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format!("{m:.decimals$} ± {s:.decimals$}"),
            _ => "n/a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: Vec<String>,
    pub records: usize,
    pub valid: usize,
    pub invalid: usize,
    pub metrics: BTreeMap<Metric, MetricStat>,
}

fn group<'a>(records: &'a [RunRecord], keys: &[GroupKey]) -> BTreeMap<Vec<String>, Vec<&'a RunRecord>> {
    let mut groups: BTreeMap<Vec<String>, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(keys.iter().map(|k| k.label(r)).collect())
            .or_default()
            .push(r);
    }
    groups
}

/// Mean and sample std of every metric per group, over successful records only.
pub fn group_stats(records: &[RunRecord], keys: &[GroupKey]) -> Vec<GroupStats> {
    group(records, keys)
        .into_iter()
        .map(|(key, rs)| {
            let valid: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.is_success()).collect();
            let metrics = Metric::ALL
                .iter()
                .map(|&m| {
                    let values: Vec<f64> = valid.iter().filter_map(|r| r.metric(m)).collect();
                    let excluded = valid.len() - values.len();
                    (m, MetricStat::from_values(values, excluded))
                })
                .collect();
            GroupStats {
                key,
                records: rs.len(),
                valid: valid.len(),
                invalid: rs.len() - valid.len(),
                metrics,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRates {
    pub k: usize,
    pub pass_at_1: f64,
    pub pass_at_k: f64,
    pub records: usize,
    pub groups: usize,
}

/// Pass@1 is the success share over all records; Pass@k the share of
/// (query, model, temperature) groups with a success among runs `0..k`.
pub fn pass_at_k(records: &[RunRecord], k: usize) -> Result<PassRates, AggregateError> {
    if k == 0 {
        return Err(AggregateError::ZeroK);
    }
    let mut groups: BTreeMap<(String, String, String), (BTreeSet<usize>, bool)> = BTreeMap::new();
    for r in records {
        let g = groups
            .entry((r.query.clone(), r.model.clone(), r.temperature.clone()))
            .or_default();
        if r.run < k {
            g.0.insert(r.run);
            g.1 |= r.is_success();
        }
    }
    for ((query, model, temp), (runs, _)) in &groups {
        if runs.len() < k {
            return Err(AggregateError::InsufficientRuns {
                group: format!("{query}/{model}/{temp}"),
                have: runs.len(),
                need: k,
            });
        }
    }
    let ok = records.iter().filter(|r| r.is_success()).count();
    let passed = groups.values().filter(|(_, s)| *s).count();
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(PassRates {
        k,
        pass_at_1: frac(ok, records.len()),
        pass_at_k: frac(passed, groups.len()),
        records: records.len(),
        groups: groups.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub metric: Metric,
    /// Mean within-group sample variance over groups with at least two values.
    pub sigma2_run: Option<f64>,
    /// Sample variance of the group means.
    pub sigma2_query: Option<f64>,
    pub groups: usize,
}

/// Splits a metric's variance into run-to-run and query-to-query parts.
/// A group is one (model, temperature, query, asset).
pub fn variance_decomposition(records: &[RunRecord], metric: Metric) -> VarianceDecomposition {
    let mut groups: BTreeMap<[&str; 4], Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_success()) {
        if let Some(v) = r.metric(metric) {
            groups
                .entry([&r.model, &r.temperature, &r.query, &r.asset])
                .or_default()
                .push(v);
        }
    }
    let groups: Vec<Vec<f64>> = groups.into_values().map(sorted).collect();
    let within: Vec<f64> = groups.iter().filter(|g| g.len() >= 2).map(|g| sample_var(g)).collect();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    VarianceDecomposition {
        metric,
        sigma2_run: (!within.is_empty()).then(|| mean(&within)),
        sigma2_query: (means.len() >= 2).then(|| sample_var(&means)),
        groups: groups.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub model: String,
    pub temperature: String,
    pub counts: BTreeMap<ErrorKind, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub rows: Vec<HistogramRow>,
    pub total: BTreeMap<ErrorKind, usize>,
}

impl ErrorHistogram {
    /// Counts in the five reporting buckets, timeouts and protocol errors as `OtherError`.
    pub fn reported(counts: &BTreeMap<ErrorKind, usize>) -> BTreeMap<ErrorKind, usize> {
        let mut out: BTreeMap<ErrorKind, usize> = ErrorKind::REPORTED.iter().map(|k| (*k, 0)).collect();
        for (k, n) in counts {
            *out.entry(k.reported()).or_default() += n;
        }
        out
    }
}

fn zeroed() -> BTreeMap<ErrorKind, usize> {
    ErrorKind::ALL.iter().map(|k| (*k, 0)).collect()
}

pub fn error_histogram(records: &[RunRecord]) -> ErrorHistogram {
    let mut rows: BTreeMap<(String, String), BTreeMap<ErrorKind, usize>> = BTreeMap::new();
    let mut total = zeroed();
    for r in records {
        *rows
            .entry((r.model.clone(), r.temperature.clone()))
            .or_insert_with(zeroed)
            .get_mut(&r.status)
            .expect("all kinds present") += 1;
        *total.get_mut(&r.status).expect("all kinds present") += 1;
    }
    ErrorHistogram {
        rows: rows
            .into_iter()
            .map(|((model, temperature), counts)| HistogramRow {
                model,
                temperature,
                counts,
            })
            .collect(),
        total,
    }
}

/// CSV table with one column per group key followed by `SR, ARR, MDD, CR, SoR, VOL`
/// cells formatted as `mean ± std`.
pub fn metrics_table_csv(stats: &[GroupStats], keys: &[GroupKey], decimals: usize) -> String {
    let mut header: Vec<String> = keys.iter().map(|k| k.as_str().to_string()).collect();
    header.extend(Metric::TABLE.iter().map(|m| m.label().to_string()));
    let mut out = csv_line(&header);
    for g in stats {
        let mut row = g.key.clone();
        row.extend(Metric::TABLE.iter().map(|m| g.metrics[m].cell(decimals)));
        out.push_str(&csv_line(&row));
    }
    out
}

/// One CSV row with minimal quoting, newline included.
pub fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    format!("{}\n", escaped.join(","))
}

// ---- record store ----

fn component(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    match cleaned.as_str() {
        "" | "." | ".." => format!("_{cleaned}"),
        _ => cleaned,
    }
}

/// `<root>/<model>/<temperature>/<query>/<asset>/run<k>.json`
pub fn record_path(root: &Path, model: &str, temperature: &str, query: &str, asset: &str, run: usize) -> PathBuf {
    root.join(component(model))
        .join(component(temperature))
        .join(component(query))
        .join(component(asset))
        .join(format!("run{run}.json"))
}

impl RunRecord {
    pub fn path(&self, root: &Path) -> PathBuf {
        record_path(root, &self.model, &self.temperature, &self.query, &self.asset, self.run)
    }
}

/// Writes the record next to its final path and renames it into place.
pub fn write_record(root: &Path, record: &RunRecord) -> Result<PathBuf, AggregateError> {
    let path = record.path(root);
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| AggregateError::Io { path: p, source }
    };
    let dir = path.parent().expect("record path has a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let text = serde_json::to_string_pretty(record).map_err(|source| AggregateError::Json {
        path: path.clone(),
        source,
    })?;
    let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

/// Loads every `run*.json` below `root`, ordered by path.
pub fn load_records(root: &Path) -> Result<Vec<RunRecord>, AggregateError> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|source| AggregateError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| AggregateError::Json { path, source })
        })
        .collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), AggregateError> {
    let entries = fs::read_dir(dir).map_err(|source| AggregateError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|source| AggregateError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("run") && n.ends_with(".json"))
        {
            out.push(path);
        }
    }
    Ok(())
}
