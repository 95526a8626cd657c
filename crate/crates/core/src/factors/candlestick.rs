//! Single-bar candle geometry.

use super::rolling::{ratio, Inputs};
use super::Family;

pub(super) fn compute(inputs: &Inputs, family: Family) -> Vec<f64> {
    (0..inputs.len())
        .map(|t| {
            let (o, h, l, c) = (inputs.open[t], inputs.high[t], inputs.low[t], inputs.close[t]);
            let range = h - l;
            let upper = h - o.max(c);
            let lower = o.min(c) - l;
            match family {
                Family::Klen => ratio(range, o),
                Family::Kup => ratio(upper, o),
                Family::Kup2 => ratio(upper, range),
                Family::Klow => ratio(lower, o),
                Family::Klow2 => ratio(lower, range),
                Family::Kmid => ratio(c - o, c),
                Family::Kmid2 => ratio(c - o, range),
                Family::Ksft => ratio(2.0 * c - h - l, o),
                Family::Ksft2 => ratio(2.0 * c - h - l, range),
                _ => unreachable!("not a candlestick family: {family}"),
            }
        })
        .collect()
}
