//! Deterministic evaluation engine for long-only, single-asset trading strategies.
//!
//! The pipeline is: load daily bars ([`marketdata`]), precompute factor columns
//! ([`factors`]), run a strategy bar by bar ([`backtest`]) where the strategy is
//! either a rule program ([`dsl`]) or an external process ([`adapter`]), then
//! score the run ([`metrics`]) and analyse many runs together ([`aggregate`],
//! [`stability`]).

pub mod adapter;
pub mod aggregate;
pub mod backtest;
pub mod dsl;
pub mod factors;
pub mod marketdata;
pub mod metrics;
pub mod stability;
pub mod synth;

pub use adapter::ErrorKind;
pub use backtest::{BacktestConfig, BacktestResult, Decision};
pub use factors::{compute_frame, parse_factor_name, FactorFrame, FactorSpec};
pub use marketdata::{Bar, Day, OhlcvSeries};
pub use metrics::MetricsReport;
