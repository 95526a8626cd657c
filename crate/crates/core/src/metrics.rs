//! Return and risk metrics over a daily portfolio return series.
//!
//! `rets` are per-period simple returns, `periods` is the annualization factor
//! (252 for daily equity data) and `rf` the per-period risk-free rate.
//! Metrics whose denominator vanishes are reported as undefined rather than
//! coerced to zero or infinity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRADING_DAYS: u32 = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("return series is empty")]
    EmptySeries,
    #[error("need at least {0} observations")]
    TooShort(usize),
    #[error("wealth factor 1 + r is not positive at index {0}")]
    NonPositiveWealth(usize),
    #[error("equity value is not positive at index {0}")]
    NonPositiveEquity(usize),
    #[error("zero dispersion, ratio is undefined")]
    DegenerateVariance,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Exactly 0 for a constant series, where rounding in the mean would otherwise leave dust.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// (Π(1 + r_t))^(N/T) − 1, accumulated in log space.
pub fn annual_return(rets: &[f64], periods: u32) -> Result<f64, MetricsError> {
    if rets.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let mut log_growth = 0.0;
    for (i, r) in rets.iter().enumerate() {
        if r.is_nan() || 1.0 + r <= 0.0 {
            return Err(MetricsError::NonPositiveWealth(i));
        }
        log_growth += r.ln_1p();
    }
    Ok((log_growth * periods as f64 / rets.len() as f64).exp_m1())
}

/// (mean − rf) / sample std · √N.
pub fn sharpe(rets: &[f64], rf: f64, periods: u32) -> Result<f64, MetricsError> {
    if rets.len() < 2 {
        return Err(MetricsError::TooShort(2));
    }
    let sd = sample_std(rets);
    if sd == 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((mean(rets) - rf) / sd * (periods as f64).sqrt())
}

/// Sample std · √N.
pub fn volatility(rets: &[f64], periods: u32) -> Result<f64, MetricsError> {
    if rets.len() < 2 {
        return Err(MetricsError::TooShort(2));
    }
    Ok(sample_std(rets) * (periods as f64).sqrt())
}

/// Largest fractional decline from a running peak, as a positive fraction.
pub fn max_drawdown(equity: &[f64]) -> Result<f64, MetricsError> {
    if equity.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    for (i, &v) in equity.iter().enumerate() {
        if v.is_nan() || v <= 0.0 {
            return Err(MetricsError::NonPositiveEquity(i));
        }
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

/// ARR / |MDD|; `None` when there was no drawdown.
pub fn calmar(arr: f64, mdd: f64) -> Option<f64> {
    if mdd == 0.0 {
        None
    } else {
        Some(arr / mdd.abs())
    }
}

/// sqrt(mean(min(r − rf, 0)²)) over all T observations, per period.
fn downside_per_period(rets: &[f64], rf: f64) -> f64 {
    let ss: f64 = rets
        .iter()
        .map(|r| {
            let d = (r - rf).min(0.0);
            d * d
        })
        .sum();
    (ss / rets.len() as f64).sqrt()
}

/// Annualized downside deviation.
pub fn downside_deviation(rets: &[f64], rf: f64, periods: u32) -> Result<f64, MetricsError> {
    if rets.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    Ok(downside_per_period(rets, rf) * (periods as f64).sqrt())
}

/// (mean − rf) / per-period downside deviation · √N, the same annualization as [`sharpe`].
pub fn sortino(rets: &[f64], rf: f64, periods: u32) -> Result<f64, MetricsError> {
    if rets.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let dd = downside_per_period(rets, rf);
    if dd == 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((mean(rets) - rf) / dd * (periods as f64).sqrt())
}

/// Full metric set for one run. `None` marks an undefined metric; the names of
/// undefined metrics are also listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arr: Option<f64>,
    pub sr: Option<f64>,
    pub mdd: Option<f64>,
    pub cr: Option<f64>,
    pub sor: Option<f64>,
    pub vol: Option<f64>,
    pub dd: Option<f64>,
    pub n_trades: usize,
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "ARR")]
    Arr,
    #[serde(rename = "MDD")]
    Mdd,
    #[serde(rename = "CR")]
    Cr,
    #[serde(rename = "SoR")]
    Sor,
    #[serde(rename = "VOL")]
    Vol,
    #[serde(rename = "DD")]
    Dd,
}

impl Metric {
    /// Column order used by report tables.
    pub const TABLE: [Metric; 6] = [
        Metric::Sr,
        Metric::Arr,
        Metric::Mdd,
        Metric::Cr,
        Metric::Sor,
        Metric::Vol,
    ];
    pub const ALL: [Metric; 7] = [
        Metric::Arr,
        Metric::Sr,
        Metric::Mdd,
        Metric::Cr,
        Metric::Sor,
        Metric::Vol,
        Metric::Dd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Sr => "SR",
            Metric::Arr => "ARR",
            Metric::Mdd => "MDD",
            Metric::Cr => "CR",
            Metric::Sor => "SoR",
            Metric::Vol => "VOL",
            Metric::Dd => "DD",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::Sr => "sr",
            Metric::Arr => "arr",
            Metric::Mdd => "mdd",
            Metric::Cr => "cr",
            Metric::Sor => "sor",
            Metric::Vol => "vol",
            Metric::Dd => "dd",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.key().eq_ignore_ascii_case(s) || m.label() == s)
    }
}

impl MetricsReport {
    pub fn compute(rets: &[f64], equity: &[f64], n_trades: usize, rf: f64, periods: u32) -> Self {
        let arr = annual_return(rets, periods).ok();
        let mdd = max_drawdown(equity).ok();
        let cr = match (arr, mdd) {
            (Some(a), Some(m)) => calmar(a, m),
            _ => None,
        };
        let mut report = MetricsReport {
            arr,
            sr: sharpe(rets, rf, periods).ok(),
            mdd,
            cr,
            sor: sortino(rets, rf, periods).ok(),
            vol: volatility(rets, periods).ok(),
            dd: downside_deviation(rets, rf, periods).ok(),
            n_trades,
            undefined: Vec::new(),
        };
        report.undefined = Metric::ALL
            .iter()
            .filter(|m| report.get(**m).is_none())
            .map(|m| m.key().to_string())
            .collect();
        report
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Arr => self.arr,
            Metric::Sr => self.sr,
            Metric::Mdd => self.mdd,
            Metric::Cr => self.cr,
            Metric::Sor => self.sor,
            Metric::Vol => self.vol,
            Metric::Dd => self.dd,
        }
    }
}
