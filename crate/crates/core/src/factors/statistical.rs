//! Dispersion, slope and correlation factors.

use super::rolling::{self, ratio, Inputs};
use super::Family;

pub(super) fn compute(inputs: &Inputs, family: Family, w: usize) -> Vec<f64> {
    let close = &inputs.close;
    let volume = &inputs.volume;
    match family {
        Family::Std => rolling::rolling(close, w, rolling::sample_std)
            .iter()
            .zip(close)
            .map(|(s, c)| ratio(*s, *c))
            .collect(),
        Family::Vstd => rolling::rolling(volume, w, rolling::sample_std)
            .iter()
            .zip(volume)
            .map(|(s, v)| ratio(*s, *v))
            .collect(),
        Family::Beta => {
            let n = close.len();
            let mut out = vec![f64::NAN; n];
            for t in w..n {
                out[t] = ratio(close[t - w] - close[t], w as f64 * close[t]);
            }
            out
        }
        Family::Corr => {
            let logv: Vec<f64> = volume
                .iter()
                .map(|v| if *v > 0.0 { v.ln() } else { f64::NAN })
                .collect();
            rolling::rolling2(close, &logv, w, rolling::pearson)
        }
        Family::Cord => {
            let dc = rolling::diff_with(close, |p, c| c - p);
            let dv = rolling::diff_with(volume, |p, c| c - p);
            rolling::rolling2(&dc, &dv, w, rolling::pearson)
        }
        _ => unreachable!("not a statistical family: {family}"),
    }
}
