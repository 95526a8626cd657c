//! Browser bindings for the demo page.
//!
//! Every export takes a JSON string and returns a JSON string. The work is
//! done by plain functions so the same code is testable natively.

use rulebench_core::backtest;
use rulebench_core::dsl::{self, DslError};
use rulebench_core::stability::agreement_report;
use rulebench_core::synth::{random_walk, WalkParams};
use rulebench_core::{compute_frame, BacktestConfig, OhlcvSeries};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_BARS: usize = 5_000;

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct Market {
    pub seed: u64,
    pub bars: usize,
    pub drift: f64,
    pub volatility: f64,
}

impl Default for Market {
    fn default() -> Self {
        let p = WalkParams::default();
        Market {
            seed: 1,
            bars: 500,
            drift: p.drift,
            volatility: p.volatility,
        }
    }
}

impl Market {
    fn series(&self) -> Result<OhlcvSeries, String> {
        if self.bars == 0 || self.bars > MAX_BARS {
            return Err(format!("bars must be in 1..={MAX_BARS}"));
        }
        if !(0.0..=0.5).contains(&self.volatility) {
            return Err("volatility must be in [0, 0.5]".into());
        }
        let params = WalkParams {
            drift: self.drift,
            volatility: self.volatility,
            ..WalkParams::default()
        };
        Ok(random_walk("SYN", self.bars, self.seed, &params))
    }
}

fn parse<'a, T: Deserialize<'a>>(input: &'a str) -> Result<T, String> {
    serde_json::from_str(input).map_err(|e| format!("bad request: {e}"))
}

#[derive(Debug, Deserialize)]
struct FactorRequest {
    #[serde(default)]
    market: Market,
    names: Vec<String>,
}

/// Factor columns over a synthetic series. Undefined values are `null`.
pub fn factor_series(input: &str) -> Result<String, String> {
    let req: FactorRequest = parse(input)?;
    let series = req.market.series()?;
    let frame = compute_frame(&series, &req.names).map_err(|e| e.to_string())?;
    let columns: serde_json::Map<String, Value> = req
        .names
        .iter()
        .map(|n| (n.clone(), json!(frame.column(n).expect("computed"))))
        .collect();
    Ok(json!({
        "timestamps": series.timestamps(),
        "close": series.closes(),
        "columns": columns,
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
struct BacktestRequest {
    #[serde(default)]
    market: Market,
    source: String,
    #[serde(default = "default_lookback")]
    lookback: usize,
}

fn default_lookback() -> usize {
    60
}

fn dsl_error(e: &DslError) -> Value {
    let (line, col) = match e {
        DslError::Syntax { line, col, .. }
        | DslError::UnknownColumn { line, col, .. }
        | DslError::DivisionByZero { line, col }
        | DslError::PrevOutOfRange { line, col } => (Some(*line), Some(*col)),
        DslError::InvalidDecision { line, .. } => (Some(*line), None),
        _ => (None, None),
    };
    json!({"message": e.to_string(), "line": line, "col": col})
}

/// Parses a rule program and backtests it on a synthetic series.
/// Parse problems come back as `{"error": {...}}`, not as `Err`.
pub fn backtest_rules(input: &str) -> Result<String, String> {
    let req: BacktestRequest = parse(input)?;
    let series = req.market.series()?;
    let mut rules = match dsl::parse(&req.source) {
        Ok(r) => r,
        Err(e) => return Ok(json!({ "error": dsl_error(&e) }).to_string()),
    };
    let config = BacktestConfig {
        lookback: req.lookback.max(1),
        ..BacktestConfig::default()
    };
    let r = backtest::run(&series, &mut rules, &config).map_err(|e| e.to_string())?;
    let closes = series.closes();
    let benchmark: Vec<f64> = closes[r.first_index..]
        .iter()
        .map(|c| config.initial_capital * c / closes[r.first_index])
        .collect();
    Ok(json!({
        "status": r.status,
        "diagnostic": r.diagnostic,
        "timestamps": r.timestamps,
        "equity": r.equity,
        "benchmark": benchmark,
        "positions": r.positions,
        "actions": r.actions,
        "n_trades": r.n_trades,
        "metrics": r.metrics,
        "warnings": r.warnings,
        "factors": rules.required_factors(),
        "normalized": rules.to_string(),
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
struct AgreementRequest {
    runs: Vec<String>,
    #[serde(default = "default_horizon")]
    horizon: usize,
}

fn default_horizon() -> usize {
    5
}

/// Reads `1 0 -1`, `B H S` or `buy hold sell` tokens separated by spaces or commas.
pub fn parse_actions(text: &str) -> Result<Vec<i8>, String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| match t.to_ascii_lowercase().as_str() {
            "1" | "+1" | "b" | "buy" => Ok(1),
            "0" | "h" | "hold" => Ok(0),
            "-1" | "s" | "sell" => Ok(-1),
            other => Err(format!("unknown action '{other}'")),
        })
        .collect()
}

/// Agreement, distribution and flip statistics for a set of action sequences.
pub fn agreement(input: &str) -> Result<String, String> {
    let req: AgreementRequest = parse(input)?;
    let runs: Vec<Vec<i8>> = req
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| parse_actions(r).map_err(|e| format!("run {}: {e}", i + 1)))
        .collect::<Result<_, _>>()?;
    let labels = (1..=runs.len()).map(|i| format!("run {i}")).collect();
    let report = agreement_report(labels, &runs, req.horizon).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = factorSeries)]
pub fn factor_series_js(input: &str) -> Result<String, JsValue> {
    factor_series(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = backtestRules)]
pub fn backtest_rules_js(input: &str) -> Result<String, JsValue> {
    backtest_rules(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = agreement)]
pub fn agreement_js(input: &str) -> Result<String, JsValue> {
    agreement(input).map_err(|e| JsValue::from_str(&e))
}
