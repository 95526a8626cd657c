//! `factors compute` and `backtest run` on a single data file.

use std::fs;
use std::path::{Path, PathBuf};

use rulebench_core::adapter::{AdapterConfig, AdapterStrategy};
use rulebench_core::aggregate::csv_line;
use rulebench_core::backtest::{self, BacktestError, Strategy};
use rulebench_core::dsl::{self, DslError};
use rulebench_core::factors::FactorError;
use rulebench_core::marketdata::{load_csv, CsvSchema, MarketDataError};
use rulebench_core::{compute_frame, BacktestConfig, BacktestResult};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Data(#[from] MarketDataError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("strategy: {0}")]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

pub fn schema(name: &str) -> Result<CsvSchema, CommandError> {
    match name {
        "default" => Ok(CsvSchema::default()),
        "yahoo" => Ok(CsvSchema::yahoo()),
        "binance" => Ok(CsvSchema::binance()),
        other => Err(CommandError::Usage(format!("unknown schema '{other}'"))),
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// CSV with a timestamp column and one column per requested factor; NaN is empty.
pub fn factors_csv(input: &Path, schema: &CsvSchema, names: &[String]) -> Result<String, CommandError> {
    let series = load_csv(input, schema)?;
    let frame = compute_frame(&series, names)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(names.iter().cloned());
    let mut out = csv_line(&header);
    let columns: Vec<&[f64]> = names
        .iter()
        .map(|n| frame.column(n).expect("computed column"))
        .collect();
    for (i, bar) in series.bars().iter().enumerate() {
        let mut row = vec![bar.timestamp.to_string()];
        row.extend(columns.iter().map(|c| fmt(c[i])));
        out.push_str(&csv_line(&row));
    }
    Ok(out)
}

pub fn load_config(path: Option<&Path>) -> Result<BacktestConfig, CommandError> {
    let Some(path) = path else {
        return Ok(BacktestConfig::default());
    };
    let err = |message: String| CommandError::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let config: BacktestConfig = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    config.validate().map_err(|e| err(e.to_string()))?;
    Ok(config)
}

pub enum StrategyArg<'a> {
    Rules(&'a Path),
    /// Shell command line, run through `sh -c`.
    Adapter {
        command: &'a str,
        factors: Vec<String>,
    },
}

pub fn run_backtest(
    data: &Path,
    schema: &CsvSchema,
    strategy: StrategyArg,
    config: &BacktestConfig,
) -> Result<BacktestResult, CommandError> {
    let series = load_csv(data, schema)?;
    let mut strategy: Box<dyn Strategy> = match strategy {
        StrategyArg::Rules(path) => Box::new(dsl::load_afs(path)?),
        StrategyArg::Adapter { command, factors } => {
            let mut c = AdapterConfig::new(["sh", "-c", command]);
            c.factors = factors;
            Box::new(AdapterStrategy::new(c))
        }
    };
    Ok(backtest::run(&series, strategy.as_mut(), config)?)
}
