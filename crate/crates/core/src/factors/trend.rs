//! Moving averages, bands, true range, MACD and price ratios.

use super::rolling::{self, ratio, Inputs};
use super::{Family, Variant};

pub(crate) const MACD_FAST: usize = 12;
pub(crate) const MACD_SLOW: usize = 26;
pub(crate) const MACD_SIGNAL: usize = 9;
const BB_WIDTH: f64 = 2.0;

pub(super) fn compute(inputs: &Inputs, family: Family, variant: Option<Variant>, w: usize) -> Vec<f64> {
    let close = &inputs.close;
    match family {
        Family::Ema => mask_prefix(ema_from(close, 0, w), w - 1),
        Family::Sma => rolling::rolling(close, w, rolling::mean),
        Family::Ma => {
            let sma = rolling::rolling(close, w, rolling::mean);
            sma.iter().zip(close).map(|(m, c)| ratio(*m, *c)).collect()
        }
        Family::Bb => {
            let sma = rolling::rolling(close, w, rolling::mean);
            let sd = rolling::rolling(close, w, rolling::sample_std);
            let k = match variant {
                Some(Variant::Upper) => BB_WIDTH,
                Some(Variant::Lower) => -BB_WIDTH,
                _ => 0.0,
            };
            sma.iter().zip(&sd).map(|(m, s)| m + k * s).collect()
        }
        Family::Atr => rolling::rolling(&true_range(inputs), w, rolling::mean),
        Family::Macd => macd(close, variant),
        Family::Roc => {
            let n = close.len();
            let mut out = vec![f64::NAN; n];
            for t in w..n {
                out[t] = ratio(close[t - w], close[t]);
            }
            out
        }
        Family::Max => rolling::rolling(close, w, rolling::max)
            .iter()
            .zip(close)
            .map(|(m, c)| ratio(*m, *c))
            .collect(),
        Family::Min => rolling::rolling(close, w, rolling::min)
            .iter()
            .zip(close)
            .map(|(m, c)| ratio(*m, *c))
            .collect(),
        _ => unreachable!("not a trend family: {family}"),
    }
}

/// Recursive EMA with α = 2/(w+1), seeded with `values[start]`. Entries before
/// `start` are `NaN`; nothing is masked beyond that.
pub(crate) fn ema_from(values: &[f64], start: usize, w: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![f64::NAN; n];
    if start >= n {
        return out;
    }
    let alpha = 2.0 / (w as f64 + 1.0);
    let mut prev = values[start];
    out[start] = prev;
    for t in start + 1..n {
        prev = alpha * values[t] + (1.0 - alpha) * prev;
        out[t] = prev;
    }
    out
}

fn mask_prefix(mut values: Vec<f64>, k: usize) -> Vec<f64> {
    for v in values.iter_mut().take(k) {
        *v = f64::NAN;
    }
    values
}

/// max(high - low, |high - prev_close|, |low - prev_close|); bar 0 uses high - low.
pub(crate) fn true_range(inputs: &Inputs) -> Vec<f64> {
    (0..inputs.len())
        .map(|t| {
            let hl = inputs.high[t] - inputs.low[t];
            if t == 0 {
                return hl;
            }
            let pc = inputs.close[t - 1];
            hl.max((inputs.high[t] - pc).abs()).max((inputs.low[t] - pc).abs())
        })
        .collect()
}

fn macd(close: &[f64], variant: Option<Variant>) -> Vec<f64> {
    let fast = ema_from(close, 0, MACD_FAST);
    let slow = ema_from(close, 0, MACD_SLOW);
    let line = mask_prefix(fast.iter().zip(&slow).map(|(f, s)| f - s).collect(), MACD_SLOW - 1);
    if variant.is_none() {
        return line;
    }
    let signal_start = MACD_SLOW - 1;
    let signal = mask_prefix(
        ema_from(&line, signal_start, MACD_SIGNAL),
        signal_start + MACD_SIGNAL - 1,
    );
    match variant {
        Some(Variant::Signal) => signal,
        _ => line.iter().zip(&signal).map(|(l, s)| l - s).collect(),
    }
}
