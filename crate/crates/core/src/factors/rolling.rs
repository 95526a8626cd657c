//! Window primitives shared by the factor families.
//!
//! Each helper evaluates its statistic directly on the window slice rather than
//! with running sums, so a value depends only on the bars inside its window.

use crate::marketdata::OhlcvSeries;

/// Raw columns plus the derived one-bar difference series.
pub(crate) struct Inputs {
    pub open: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
    /// Simple close-to-close return; `NaN` at bar 0.
    pub ret: Vec<f64>,
}

impl Inputs {
    pub fn new(series: &OhlcvSeries) -> Self {
        let close = series.closes();
        let ret = diff_with(&close, |prev, cur| cur / prev - 1.0);
        Inputs {
            open: series.opens(),
            high: series.highs(),
            low: series.lows(),
            close,
            volume: series.volumes(),
            ret,
        }
    }

    pub fn len(&self) -> usize {
        self.close.len()
    }
}

/// `f(x[t-1], x[t])` for `t >= 1`, `NaN` at index 0.
pub(crate) fn diff_with(values: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    for t in 1..values.len() {
        out[t] = f(values[t - 1], values[t]);
    }
    out
}

/// Applies `f` to every full window of length `w`. Output is `NaN` before
/// index `w - 1` and wherever the window holds a `NaN`.
pub(crate) fn rolling(values: &[f64], w: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![f64::NAN; n];
    if w == 0 {
        return out;
    }
    for t in (w - 1)..n {
        let win = &values[t + 1 - w..=t];
        if win.iter().any(|v| v.is_nan()) {
            continue;
        }
        out[t] = f(win);
    }
    out
}

/// Like [`rolling`] but over two aligned series.
pub(crate) fn rolling2(a: &[f64], b: &[f64], w: usize, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![f64::NAN; n];
    if w == 0 {
        return out;
    }
    for t in (w - 1)..n {
        let wa = &a[t + 1 - w..=t];
        let wb = &b[t + 1 - w..=t];
        if wa.iter().chain(wb).any(|v| v.is_nan()) {
            continue;
        }
        out[t] = f(wa, wb);
    }
    out
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); `NaN` for fewer than two points.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Pearson correlation, `NaN` when either side has zero variance.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

pub(crate) fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Linear interpolation between order statistics at position `q * (n - 1)`.
pub(crate) fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `num / den`, or `NaN` when the denominator is zero.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}
