//! Bar-by-bar simulation of one strategy on one asset.
//!
//! Long-only and frictionless. The decision taken at the close of bar `t`
//! sets the target weight `w_t`, which earns the close-to-close return from
//! `t` to `t + 1`. The last evaluated bar earns nothing.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::ErrorKind;
use crate::dsl::{self, RuleSet};
use crate::factors::{compute_frame, FactorError, FactorFrame};
use crate::marketdata::{Day, OhlcvSeries};
use crate::metrics::{MetricsReport, TRADING_DAYS};

/// A strategy's output for one bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub signal: i8,
    pub position: f64,
}

impl Decision {
    pub const HOLD: Decision = Decision {
        signal: 0,
        position: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        matches!(self.signal, -1..=1) && (0.0..=1.0).contains(&self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub lookback: usize,
    pub initial_capital: f64,
    pub cost_rate: f64,
    pub periods_per_year: u32,
    pub risk_free: f64,
    pub start: Option<Day>,
    pub end: Option<Day>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            lookback: 300,
            initial_capital: 100_000.0,
            cost_rate: 0.0,
            periods_per_year: TRADING_DAYS,
            risk_free: 0.0,
            start: None,
            end: None,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if self.lookback == 0 {
            return Err(BacktestError::Config("lookback must be at least 1".into()));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(BacktestError::Config("initial_capital must be positive".into()));
        }
        if self.cost_rate != 0.0 {
            return Err(BacktestError::Config(
                "transaction costs are not supported; cost_rate must be 0".into(),
            ));
        }
        if self.periods_per_year == 0 {
            return Err(BacktestError::Config("periods_per_year must be positive".into()));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(BacktestError::Config(format!("start {s} is after end {e}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("insufficient history: {len} bars, lookback {lookback}")]
    InsufficientHistory { len: usize, lookback: usize },
    #[error("no bars in the evaluation range")]
    EmptyRange,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Why a strategy stopped producing decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyFailure {
    pub kind: ErrorKind,
    pub message: String,
}

/// Anything that turns bars into decisions.
///
/// `decide` is called for increasing indices starting at the `first` passed to
/// `start`; implementations must only read frame rows up to `index`.
pub trait Strategy {
    /// Factor columns the strategy needs in its frame.
    fn factors(&self) -> Vec<String>;

    fn start(&mut self, _frame: &FactorFrame, _first: usize, _lookback: usize) -> Result<(), StrategyFailure> {
        Ok(())
    }

    fn decide(&mut self, frame: &FactorFrame, index: usize) -> Result<Decision, StrategyFailure>;

    fn finish(&mut self) {}
}

impl Strategy for RuleSet {
    fn factors(&self) -> Vec<String> {
        self.required_factors()
    }

    fn decide(&mut self, frame: &FactorFrame, index: usize) -> Result<Decision, StrategyFailure> {
        dsl::evaluate(self, frame, index).map_err(|e| StrategyFailure {
            kind: ErrorKind::OtherError,
            message: e.to_string(),
        })
    }
}

/// Everything one run produced. Arrays are indexed by evaluated bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub symbol: String,
    pub config: BacktestConfig,
    /// Series index of the first evaluated bar.
    pub first_index: usize,
    pub timestamps: Vec<Day>,
    pub equity: Vec<f64>,
    /// Target weight held after each bar's decision.
    pub positions: Vec<f64>,
    pub actions: Vec<i8>,
    /// Portfolio return from each evaluated bar to the next; one shorter than `equity`.
    pub rets: Vec<f64>,
    pub n_trades: usize,
    pub status: ErrorKind,
    pub diagnostic: Option<String>,
    pub warnings: Vec<String>,
    pub metrics: Option<MetricsReport>,
}

/// Index range of evaluated bars.
pub fn evaluation_range(series: &OhlcvSeries, config: &BacktestConfig) -> Result<(usize, usize), BacktestError> {
    let n = series.len();
    if n < config.lookback {
        return Err(BacktestError::InsufficientHistory {
            len: n,
            lookback: config.lookback,
        });
    }
    let bars = series.bars();
    let start = match config.start {
        Some(day) => bars.partition_point(|b| b.timestamp < day),
        None => 0,
    };
    let end = match config.end {
        Some(day) => bars.partition_point(|b| b.timestamp <= day),
        None => n,
    };
    let first = start.max(config.lookback - 1);
    if first >= end {
        return Err(BacktestError::EmptyRange);
    }
    Ok((first, end - 1))
}

/// Runs `strategy` over `series`.
///
/// Configuration and data problems are errors; a failing strategy yields a
/// result whose `status` is not `Success` and which carries no metrics.
pub fn run(
    series: &OhlcvSeries,
    strategy: &mut dyn Strategy,
    config: &BacktestConfig,
) -> Result<BacktestResult, BacktestError> {
    config.validate()?;
    let (first, last) = evaluation_range(series, config)?;
    let frame = compute_frame(series, &strategy.factors())?;
    Ok(run_on_frame(&frame, strategy, config, first, last))
}

fn run_on_frame(
    frame: &FactorFrame,
    strategy: &mut dyn Strategy,
    config: &BacktestConfig,
    first: usize,
    last: usize,
) -> BacktestResult {
    let bars = frame.series().bars();
    let mut result = BacktestResult {
        symbol: frame.series().symbol.clone(),
        config: config.clone(),
        first_index: first,
        timestamps: Vec::new(),
        equity: Vec::new(),
        positions: Vec::new(),
        actions: Vec::new(),
        rets: Vec::new(),
        n_trades: 0,
        status: ErrorKind::Success,
        diagnostic: None,
        warnings: Vec::new(),
        metrics: None,
    };

    let fail = |result: &mut BacktestResult, f: StrategyFailure| {
        result.status = f.kind;
        result.diagnostic = Some(f.message);
    };

    if let Err(f) = strategy.start(frame, first, config.lookback) {
        fail(&mut result, f);
        strategy.finish();
        return result;
    }

    let mut w = 0.0;
    let mut value = config.initial_capital;
    for t in first..=last {
        if t > first {
            let r = w * (bars[t].close / bars[t - 1].close - 1.0);
            value *= 1.0 + r;
            result.rets.push(r);
        }
        let decision = match strategy.decide(frame, t) {
            Ok(d) if d.is_valid() => d,
            Ok(d) => {
                fail(
                    &mut result,
                    StrategyFailure {
                        kind: ErrorKind::ProtocolError,
                        message: format!("bar {t}: invalid decision {d:?}"),
                    },
                );
                break;
            }
            Err(f) => {
                fail(&mut result, f);
                break;
            }
        };
        let target = match decision.signal {
            1 => decision.position,
            -1 => {
                if decision.position > 0.0 {
                    result.warnings.push(format!(
                        "bar {t}: sell with position {}; treated as 0",
                        decision.position
                    ));
                }
                0.0
            }
            _ => w,
        };
        if target != w {
            result.n_trades += 1;
        }
        w = target;
        result.timestamps.push(bars[t].timestamp);
        result.equity.push(value);
        result.positions.push(w);
        result.actions.push(decision.signal);
    }
    strategy.finish();

    if result.status.is_success() {
        result.metrics = Some(MetricsReport::compute(
            &result.rets,
            &result.equity,
            result.n_trades,
            config.risk_free,
            config.periods_per_year,
        ));
    } else {
        // drop the return earned into the bar that never got a decision
        result.rets.truncate(result.equity.len().saturating_sub(1));
    }
    result
}

/// Outcome of comparing repeated runs against the first one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Determinism {
    Equal,
    /// Run `run` used a different config or asset, so it is not comparable.
    ConfigMismatch {
        run: usize,
    },
    /// Run `run` first differs from run 0 at evaluated bar `index`.
    Diverged {
        run: usize,
        index: usize,
    },
}

pub fn compare_runs(results: &[BacktestResult]) -> Determinism {
    let Some(base) = results.first() else {
        return Determinism::Equal;
    };
    for (k, other) in results.iter().enumerate().skip(1) {
        if other.config != base.config || other.symbol != base.symbol {
            return Determinism::ConfigMismatch { run: k };
        }
        if let Some(index) = first_divergence(base, other) {
            return Determinism::Diverged { run: k, index };
        }
    }
    Determinism::Equal
}

fn first_divergence(a: &BacktestResult, b: &BacktestResult) -> Option<usize> {
    let n = a.equity.len().min(b.equity.len());
    for i in 0..n {
        if a.equity[i].to_bits() != b.equity[i].to_bits()
            || a.actions[i] != b.actions[i]
            || a.positions[i].to_bits() != b.positions[i].to_bits()
        {
            return Some(i);
        }
    }
    if a.equity.len() != b.equity.len() || a.status != b.status {
        return Some(n);
    }
    None
}

impl BacktestResult {
    /// `timestamp,equity,position,ret` where `ret` is the return earned into the bar.
    pub fn equity_csv(&self) -> String {
        let mut out = String::from("timestamp,equity,position,ret\n");
        for i in 0..self.equity.len() {
            let ret = if i == 0 { 0.0 } else { self.rets[i - 1] };
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.timestamps[i], self.equity[i], self.positions[i], ret
            ));
        }
        out
    }

    /// `timestamp,index,signal,position` with the series index of each bar.
    pub fn actions_csv(&self) -> String {
        let mut out = String::from("timestamp,index,signal,position\n");
        for i in 0..self.actions.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.timestamps[i],
                self.first_index + i,
                self.actions[i],
                self.positions[i]
            ));
        }
        out
    }

    /// Writes `equity.csv`, `actions.csv` and `result.json` into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<(), BacktestError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("equity.csv"), self.equity_csv())?;
        fs::write(dir.join("actions.csv"), self.actions_csv())?;
        fs::write(dir.join("result.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
