//! Where the current bar sits inside its window: rank, extreme timing,
//! raw stochastic value and quantile distances.
//!
//! Extreme positions are counted in bars elapsed since the extreme, so 0 means
//! the extreme is the current bar. Ties resolve to the oldest occurrence.

use super::rolling::{self, ratio, Inputs};
use super::Family;

pub(super) fn compute(inputs: &Inputs, family: Family, w: usize) -> Vec<f64> {
    let close = &inputs.close;
    let wf = w as f64;
    match family {
        Family::Rank => rolling::rolling(close, w, |win| {
            let cur = win[win.len() - 1];
            win.iter().filter(|x| **x < cur).count() as f64 / wf
        }),
        Family::Imax => rolling::rolling(&inputs.high, w, |win| elapsed_since_max(win) as f64 / wf),
        Family::Imin => rolling::rolling(&inputs.low, w, |win| elapsed_since_min(win) as f64 / wf),
        Family::Imxd => rolling::rolling2(&inputs.high, &inputs.low, w, |hi, lo| {
            (elapsed_since_max(hi) as f64 - elapsed_since_min(lo) as f64) / wf
        }),
        Family::Rsv => {
            let lo = rolling::rolling(&inputs.low, w, rolling::min);
            let hi = rolling::rolling(&inputs.high, w, rolling::max);
            (0..close.len())
                .map(|t| ratio(close[t] - lo[t], hi[t] - lo[t]))
                .collect()
        }
        Family::Qtlu => quantile_distance(close, w, 0.8),
        Family::Qtld => quantile_distance(close, w, 0.2),
        _ => unreachable!("not a position family: {family}"),
    }
}

fn elapsed_since_max(win: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in win.iter().enumerate() {
        if *x > win[best] {
            best = i;
        }
    }
    win.len() - 1 - best
}

fn elapsed_since_min(win: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in win.iter().enumerate() {
        if *x < win[best] {
            best = i;
        }
    }
    win.len() - 1 - best
}

fn quantile_distance(close: &[f64], w: usize, q: f64) -> Vec<f64> {
    rolling::rolling(close, w, |win| {
        let cur = win[win.len() - 1];
        ratio(cur - rolling::quantile(win, q), cur)
    })
}

#[cfg(test)]
mod tests {
    use crate::factors::parse_factor_name;
    use crate::marketdata::{Bar, Day, OhlcvSeries};

    fn series(closes: &[f64]) -> OhlcvSeries {
        OhlcvSeries::new(
            "T",
            closes
                .iter()
                .enumerate()
                .map(|(i, &c)| Bar {
                    timestamp: Day(i as i64),
                    open: c,
                    high: c,
                    low: c,
                    close: c,
                    volume: 1.0,
                })
                .collect(),
        )
    }

    #[test]
    fn increasing_window_rank_is_095() {
        let s = series(&(1..=25).map(|x| x as f64).collect::<Vec<_>>());
        let rank = parse_factor_name("rank_20").unwrap().compute(&s);
        assert_eq!(rank[19], 0.95);
        assert_eq!(rank[24], 0.95);
        let imax = parse_factor_name("imax_20").unwrap().compute(&s);
        assert_eq!(imax[24], 0.0);
        let imin = parse_factor_name("imin_20").unwrap().compute(&s);
        assert_eq!(imin[24], 0.95);
        let imxd = parse_factor_name("imxd_20").unwrap().compute(&s);
        assert_eq!(imxd[24], -0.95);
    }

    #[test]
    fn constant_window() {
        let s = series(&[4.0; 12]);
        let rsv = parse_factor_name("rsv_5").unwrap().compute(&s);
        assert!(rsv.iter().all(|v| v.is_nan()));
        for name in ["qtlu_5", "qtld_5"] {
            let col = parse_factor_name(name).unwrap().compute(&s);
            assert!(col[4..].iter().all(|v| *v == 0.0));
        }
        let rank = parse_factor_name("rank_5").unwrap().compute(&s);
        assert!(rank[4..].iter().all(|v| *v == 0.0));
    }
}
