//! Batch evaluation: every (job, asset, run) of a manifest becomes one record.
//!
//! Existing records are kept, so an interrupted batch resumes where it
//! stopped. Tasks run on a rayon pool; each record is written atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rulebench_core::adapter::{AdapterConfig, AdapterStrategy};
use rulebench_core::aggregate::{self, AggregateError, RunRecord};
use rulebench_core::backtest::{self, BacktestError, Strategy};
use rulebench_core::dsl::{self, DslError};
use rulebench_core::marketdata::load_csv;
use rulebench_core::{ErrorKind, OhlcvSeries};
use thiserror::Error;

use crate::manifest::{substitute, Job, Manifest, ManifestError, StrategySource};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot load data for {asset}: {message}")]
    Data { asset: String, message: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Store(#[from] AggregateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalSummary {
    pub total: usize,
    pub written: usize,
    /// Records already present from an earlier invocation.
    pub skipped: usize,
    /// Records (new or kept) whose status is not success.
    pub failed: usize,
    pub by_status: BTreeMap<ErrorKind, usize>,
}

impl EvalSummary {
    /// 0 when every record succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed > 0)
    }
}

#[derive(Debug, Clone)]
pub struct Task<'a> {
    pub job: &'a Job,
    pub asset: &'a str,
    pub run: usize,
}

pub fn tasks(manifest: &Manifest) -> Vec<Task<'_>> {
    let mut out = Vec::new();
    for job in &manifest.jobs {
        for asset in &job.assets {
            for run in 0..job.runs {
                out.push(Task { job, asset, run });
            }
        }
    }
    out
}

fn dsl_status(e: &DslError) -> ErrorKind {
    match e {
        DslError::Syntax { .. } | DslError::PrevOutOfRange { .. } | DslError::DivisionByZero { .. } => {
            ErrorKind::SyntaxError
        }
        DslError::UnknownColumn { .. } => ErrorKind::NameError,
        DslError::InvalidDecision { .. } | DslError::InconsistentSignalPosition { .. } | DslError::Io(_) => {
            ErrorKind::OtherError
        }
    }
}

fn backtest_status(e: &BacktestError) -> ErrorKind {
    match e {
        BacktestError::Factor(_) => ErrorKind::NameError,
        _ => ErrorKind::OtherError,
    }
}

fn strategy_for(manifest: &Manifest, task: &Task) -> Result<Box<dyn Strategy>, (ErrorKind, String)> {
    match &task.job.source {
        StrategySource::Rules(_) => {
            let path = task.job.strategy_path(&manifest.base, task.run).expect("rule job");
            dsl::load_afs(&path)
                .map(|r| Box::new(r) as Box<dyn Strategy>)
                .map_err(|e| (dsl_status(&e), e.to_string()))
        }
        StrategySource::Adapter {
            command,
            factors,
            step_timeout_ms,
            total_timeout_ms,
            max_restarts,
        } => {
            let base = manifest.base.to_string_lossy();
            let mut config =
                AdapterConfig::new(command.iter().map(|a| substitute(a, task.run).replace("{dir}", &base)));
            config.factors = factors.clone();
            if let Some(ms) = step_timeout_ms {
                config.step_timeout_ms = *ms;
            }
            if let Some(ms) = total_timeout_ms {
                config.total_timeout_ms = *ms;
            }
            if let Some(n) = max_restarts {
                config.max_restarts = *n;
            }
            Ok(Box::new(AdapterStrategy::new(config)))
        }
    }
}

/// Evaluates one task. Strategy problems become non-success records.
pub fn evaluate_task(manifest: &Manifest, series: &OhlcvSeries, task: &Task) -> RunRecord {
    let job = task.job;
    let mut record = RunRecord {
        query: job.query.clone(),
        model: job.model.clone(),
        asset: task.asset.to_string(),
        level: job.level.clone(),
        grade: job.grade.clone(),
        temperature: job.temperature.clone(),
        run: task.run,
        status: ErrorKind::Success,
        diagnostic: None,
        metrics: None,
        equity: Vec::new(),
        actions: Vec::new(),
    };
    let mut strategy = match strategy_for(manifest, task) {
        Ok(s) => s,
        Err((kind, message)) => {
            record.status = kind;
            record.diagnostic = Some(message);
            return record;
        }
    };
    match backtest::run(series, strategy.as_mut(), &manifest.config) {
        Ok(result) => {
            record.status = result.status;
            record.diagnostic = result.diagnostic;
            record.metrics = result.metrics;
            record.equity = result.equity;
            record.actions = result.actions;
        }
        Err(e) => {
            record.status = backtest_status(&e);
            record.diagnostic = Some(e.to_string());
        }
    }
    record
}

fn existing(path: &Path) -> Option<RunRecord> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every missing record of `manifest` on `workers` threads (0 = all cores).
pub fn run_manifest(manifest: &Manifest, workers: usize) -> Result<EvalSummary, EvalError> {
    let mut data: BTreeMap<&str, OhlcvSeries> = BTreeMap::new();
    for job in &manifest.jobs {
        for asset in &job.assets {
            if !data.contains_key(asset.as_str()) {
                let series = load_csv(manifest.asset_path(asset), &manifest.schema).map_err(|e| EvalError::Data {
                    asset: asset.clone(),
                    message: e.to_string(),
                })?;
                data.insert(asset, series);
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let root: PathBuf = manifest.output.clone();
    let tasks = tasks(manifest);
    let outcomes: Vec<Result<(ErrorKind, bool), AggregateError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let path = aggregate::record_path(
                    &root,
                    &task.job.model,
                    &task.job.temperature,
                    &task.job.query,
                    task.asset,
                    task.run,
                );
                if let Some(r) = existing(&path) {
                    return Ok((r.status, false));
                }
                let record = evaluate_task(manifest, &data[task.asset], task);
                aggregate::write_record(&root, &record)?;
                Ok((record.status, true))
            })
            .collect()
    });

    let mut summary = EvalSummary::default();
    for outcome in outcomes {
        let (status, written) = outcome?;
        summary.total += 1;
        if written {
            summary.written += 1;
        } else {
            summary.skipped += 1;
        }
        if !status.is_success() {
            summary.failed += 1;
        }
        *summary.by_status.entry(status).or_default() += 1;
    }
    Ok(summary)
}
