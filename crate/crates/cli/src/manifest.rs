//! Batch evaluation manifests.
//!
//! ```json
//! {
//!   "data_dir": "data",
//!   "output": "runs",
//!   "schema": "default",
//!   "config": { "lookback": 300 },
//!   "jobs": [
//!     { "query": "q1", "model": "m1", "temperature": "0.0", "level": "L1",
//!       "strategy": "strategies/q1/run{run}.afs", "assets": ["BTCUSDT"], "runs": 5 },
//!     { "query": "q2", "model": "m1", "temperature": "0.0",
//!       "adapter": ["python3", "gen/q2_{run}.py"], "factors": ["rsi_14"], "assets": ["AAPL"] }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `{run}` in a
//! strategy path or adapter argument is replaced by the run index. Each asset
//! is read from `<data_dir>/<asset>.csv`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rulebench_core::marketdata::CsvSchema;
use rulebench_core::BacktestConfig;
use serde::Deserialize;
use thiserror::Error;

pub const DATA_ENV: &str = "RULEBENCH_DATA";
pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Error)]
#[error("{path}: {field}: {message}")]
pub struct ManifestError {
    pub path: PathBuf,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    data_dir: Option<PathBuf>,
    output: Option<PathBuf>,
    #[serde(default)]
    schema: Option<String>,
    #[serde(default)]
    config: BacktestConfig,
    jobs: Vec<RawJob>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    query: String,
    model: String,
    temperature: String,
    level: Option<String>,
    grade: Option<String>,
    strategy: Option<String>,
    adapter: Option<Vec<String>>,
    #[serde(default)]
    factors: Vec<String>,
    #[serde(default = "default_runs")]
    runs: usize,
    assets: Vec<String>,
    step_timeout_ms: Option<u64>,
    total_timeout_ms: Option<u64>,
    max_restarts: Option<u32>,
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategySource {
    /// Rule file path template.
    Rules(String),
    Adapter {
        command: Vec<String>,
        factors: Vec<String>,
        step_timeout_ms: Option<u64>,
        total_timeout_ms: Option<u64>,
        max_restarts: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub query: String,
    pub model: String,
    pub temperature: String,
    pub level: Option<String>,
    pub grade: Option<String>,
    pub source: StrategySource,
    pub runs: usize,
    pub assets: Vec<String>,
}

impl Job {
    /// Path of the rule file for run `k`, or `None` for adapter jobs.
    pub fn strategy_path(&self, base: &Path, run: usize) -> Option<PathBuf> {
        match &self.source {
            StrategySource::Rules(t) => Some(base.join(substitute(t, run))),
            StrategySource::Adapter { .. } => None,
        }
    }
}

pub fn substitute(template: &str, run: usize) -> String {
    template.replace("{run}", &run.to_string())
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    /// Directory relative paths resolve against.
    pub base: PathBuf,
    pub data_dir: PathBuf,
    pub output: PathBuf,
    pub schema: CsvSchema,
    pub config: BacktestConfig,
    pub jobs: Vec<Job>,
}

impl Manifest {
    pub fn asset_path(&self, asset: &str) -> PathBuf {
        self.data_dir.join(format!("{asset}.csv"))
    }

    /// Reads and validates a manifest. `data_dir` overrides the manifest's own
    /// setting; without either, `RULEBENCH_DATA` and then the manifest
    /// directory are used.
    pub fn load(path: &Path, data_dir: Option<&Path>) -> Result<Manifest, ManifestError> {
        let err = |field: &str, message: String| ManifestError {
            path: path.to_path_buf(),
            field: field.to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err("<file>", e.to_string()))?;
        let raw: RawManifest = serde_json::from_str(&text).map_err(|e| err("<json>", e.to_string()))?;
        raw.config.validate().map_err(|e| err("config", e.to_string()))?;

        let base = path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        let data_dir = match (data_dir, &raw.data_dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => base.join(d),
            (None, None) => std::env::var_os(DATA_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| base.clone()),
        };
        let output = base.join(raw.output.clone().unwrap_or_else(|| PathBuf::from("runs")));
        let schema = match raw.schema.as_deref().unwrap_or("default") {
            "default" => CsvSchema::default(),
            "yahoo" => CsvSchema::yahoo(),
            "binance" => CsvSchema::binance(),
            other => return Err(err("schema", format!("unknown schema '{other}'"))),
        };

        let mut keys = BTreeSet::new();
        let mut jobs = Vec::new();
        for (i, j) in raw.jobs.into_iter().enumerate() {
            let field = |name: &str| format!("jobs[{i}].{name}");
            if !keys.insert((j.query.clone(), j.model.clone(), j.temperature.clone())) {
                return Err(err(
                    &field("query"),
                    format!("duplicate job ({}, {}, {})", j.query, j.model, j.temperature),
                ));
            }
            for (name, value) in [
                ("query", &j.query),
                ("model", &j.model),
                ("temperature", &j.temperature),
            ] {
                if value.trim().is_empty() {
                    return Err(err(&field(name), "must not be empty".into()));
                }
            }
            if j.runs == 0 {
                return Err(err(&field("runs"), "must be at least 1".into()));
            }
            if j.assets.is_empty() {
                return Err(err(&field("assets"), "at least one asset required".into()));
            }
            let source = match (j.strategy, j.adapter) {
                (Some(s), None) => {
                    if !j.factors.is_empty() {
                        return Err(err(&field("factors"), "only valid for adapter jobs".into()));
                    }
                    StrategySource::Rules(s)
                }
                (None, Some(cmd)) if !cmd.is_empty() => StrategySource::Adapter {
                    command: cmd,
                    factors: j.factors,
                    step_timeout_ms: j.step_timeout_ms,
                    total_timeout_ms: j.total_timeout_ms,
                    max_restarts: j.max_restarts,
                },
                (None, Some(_)) => return Err(err(&field("adapter"), "empty command".into())),
                _ => {
                    return Err(err(
                        &field("strategy"),
                        "exactly one of 'strategy' or 'adapter' is required".into(),
                    ))
                }
            };
            jobs.push(Job {
                query: j.query,
                model: j.model,
                temperature: j.temperature,
                level: j.level,
                grade: j.grade,
                source,
                runs: j.runs,
                assets: j.assets,
            });
        }

        let manifest = Manifest {
            path: path.to_path_buf(),
            base,
            data_dir,
            output,
            schema,
            config: raw.config,
            jobs,
        };
        for (i, job) in manifest.jobs.iter().enumerate() {
            for asset in &job.assets {
                let p = manifest.asset_path(asset);
                if !p.is_file() {
                    return Err(err(
                        &format!("jobs[{i}].assets"),
                        format!("no data file {}", p.display()),
                    ));
                }
            }
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("data")).unwrap();
        write(
            &dir.path().join("data"),
            "AAA.csv",
            "timestamp,open,high,low,close,volume\n",
        );
        let p = write(
            dir.path(),
            "m.json",
            r#"{"data_dir": "data", "config": {"lookback": 10},
                "jobs": [{"query": "q", "model": "m", "temperature": "0", "strategy": "s{run}.afs", "assets": ["AAA"]}]}"#,
        );
        let m = Manifest::load(&p, None).unwrap();
        assert_eq!(m.config.lookback, 10);
        assert_eq!(m.jobs[0].runs, DEFAULT_RUNS);
        assert_eq!(m.jobs[0].strategy_path(&m.base, 3).unwrap(), dir.path().join("s3.afs"));
        assert_eq!(m.output, dir.path().join("runs"));
    }

    #[test]
    fn reports_field_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "AAA.csv", "");
        let cases = [
            (
                r#"{"jobs": [{"query": "q", "model": "m", "temperature": "0", "assets": ["AAA"]}]}"#,
                "jobs[0].strategy",
            ),
            (
                r#"{"jobs": [{"query": "q", "model": "m", "temperature": "0", "strategy": "a", "assets": ["BBB"]}]}"#,
                "jobs[0].assets",
            ),
            (
                r#"{"jobs": [{"query": "q", "model": "m", "temperature": "0", "strategy": "a", "assets": ["AAA"]},
                          {"query": "q", "model": "m", "temperature": "0", "strategy": "b", "assets": ["AAA"]}]}"#,
                "jobs[1].query",
            ),
            (r#"{"config": {"cost_rate": 0.01}, "jobs": []}"#, "config"),
            (
                r#"{"jobs": [{"query": "q", "model": "m", "temperature": "0", "strategy": "a", "assets": ["AAA"], "runs": 0}]}"#,
                "jobs[0].runs",
            ),
        ];
        for (text, field) in cases {
            let p = write(dir.path(), "m.json", text);
            let e = Manifest::load(&p, Some(dir.path())).unwrap_err();
            assert_eq!(e.field, field, "{e}");
        }
    }
}
