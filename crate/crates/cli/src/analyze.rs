//! `stability analyze`: agreement statistics over a bundle of runs.
//!
//! A bundle is a directory holding either `actions.csv` files (as written by
//! `backtest run`) or `run*.json` records. Every run must cover the same bars.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rulebench_core::aggregate::{self, csv_line, AggregateError};
use rulebench_core::stability::{agreement_report, temperature_agreement, AgreementReport, StabilityError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("no runs found under {0}")]
    NoRuns(PathBuf),
    #[error("{path}: {message}")]
    BadActions { path: PathBuf, message: String },
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Store(#[from] AggregateError),
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AnalyzeError + '_ {
    move |source| AnalyzeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads the `signal` column of an actions CSV.
pub fn read_actions(path: &Path) -> Result<Vec<i8>, AnalyzeError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| AnalyzeError::BadActions {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == "signal")
        .ok_or_else(|| bad("no 'signal' column".into()))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.split(',').nth(col).unwrap_or("").trim();
            match field.parse::<i8>() {
                Ok(v @ -1..=1) => Ok(v),
                _ => Err(bad(format!("line {}: bad signal '{field}'", i + 2))),
            }
        })
        .collect()
}

fn find_actions(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), AnalyzeError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            find_actions(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "actions.csv") {
            out.push(path);
        }
    }
    Ok(())
}

/// Labelled action sequences found under `dir`, in path order.
pub fn load_bundle(dir: &Path) -> Result<(Vec<String>, Vec<Vec<i8>>), AnalyzeError> {
    let mut files = Vec::new();
    find_actions(dir, &mut files)?;
    files.sort();
    let (labels, runs) = if files.is_empty() {
        aggregate::load_records(dir)?
            .into_iter()
            .filter(|r| r.is_success())
            .map(|r| {
                let label = format!("{}/{}/{}/{}/run{}", r.model, r.temperature, r.query, r.asset, r.run);
                (label, r.actions)
            })
            .unzip()
    } else {
        let mut labels = Vec::new();
        let mut runs = Vec::new();
        for f in files {
            let parent = f.parent().unwrap_or(dir);
            let label = parent
                .strip_prefix(dir)
                .unwrap_or(parent)
                .to_string_lossy()
                .into_owned();
            labels.push(if label.is_empty() { ".".to_string() } else { label });
            runs.push(read_actions(&f)?);
        }
        (labels, runs)
    };
    if runs.is_empty() {
        return Err(AnalyzeError::NoRuns(dir.to_path_buf()));
    }
    Ok((labels, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    #[serde(flatten)]
    pub report: AgreementReport,
    pub flip_horizon: usize,
    /// Agreement of the modal sequences of this bundle and `--compare`.
    pub temperature_agreement: Option<f64>,
}

pub fn analyze(runs_dir: &Path, compare: Option<&Path>, flip_horizon: usize) -> Result<Analysis, AnalyzeError> {
    let (labels, runs) = load_bundle(runs_dir)?;
    let report = agreement_report(labels, &runs, flip_horizon)?;
    let temperature_agreement = match compare {
        Some(other) => Some(temperature_agreement(&runs, &load_bundle(other)?.1)?),
        None => None,
    };
    Ok(Analysis {
        report,
        flip_horizon,
        temperature_agreement,
    })
}

/// Writes `out` (JSON) plus `matrix.csv`, `stepwise.csv` and `runs.csv` next to it.
pub fn write_analysis(analysis: &Analysis, out: &Path) -> Result<(), AnalyzeError> {
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(analysis).expect("analysis serializes");
    fs::write(out, json + "\n").map_err(io_err(out))?;

    let r = &analysis.report;
    let mut matrix = csv_line(
        &std::iter::once("run".to_string())
            .chain(r.runs.iter().cloned())
            .collect::<Vec<_>>(),
    );
    for (label, row) in r.runs.iter().zip(&r.matrix) {
        let mut fields = vec![label.clone()];
        fields.extend(row.iter().map(|v| format!("{v:.6}")));
        matrix.push_str(&csv_line(&fields));
    }
    let mut stepwise = csv_line(&["step", "modal", "jaccard"].map(String::from));
    for (t, (m, j)) in r.stepwise.series.iter().zip(&r.stepwise_jaccard.series).enumerate() {
        stepwise.push_str(&csv_line(&[t.to_string(), format!("{m:.6}"), format!("{j:.6}")]));
    }
    let mut runs = csv_line(&["run", "buy", "hold", "sell", "flip_rate"].map(String::from));
    for ((label, d), f) in r.runs.iter().zip(&r.distributions).zip(&r.flip_rates) {
        runs.push_str(&csv_line(&[
            label.clone(),
            format!("{:.6}", d.buy),
            format!("{:.6}", d.hold),
            format!("{:.6}", d.sell),
            format!("{f:.6}"),
        ]));
    }
    for (name, text) in [("matrix.csv", matrix), ("stepwise.csv", stepwise), ("runs.csv", runs)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    Ok(())
}
