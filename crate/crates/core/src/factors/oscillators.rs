//! Bounded oscillators (RSI, MFI, stochastic), CCI and on-balance volume.

use super::rolling::{self, ratio, Inputs};
use super::{Family, Variant};

pub(crate) const STOCH_D_SMOOTHING: usize = 3;
const CCI_SCALE: f64 = 0.015;

pub(super) fn compute(inputs: &Inputs, family: Family, variant: Option<Variant>, w: usize) -> Vec<f64> {
    match family {
        Family::Rsi => {
            let delta = rolling::diff_with(&inputs.close, |p, c| c - p);
            let gains: Vec<f64> = delta.iter().map(|d| d.max(0.0)).collect();
            let losses: Vec<f64> = delta.iter().map(|d| (-d).max(0.0)).collect();
            // f64::max drops NaN, so restore the bar-0 gap explicitly
            let gains = keep_nan(&delta, gains);
            let losses = keep_nan(&delta, losses);
            rolling::rolling2(&gains, &losses, w, |g, l| {
                strength_index(rolling::mean(g), rolling::mean(l))
            })
        }
        Family::Mfi => {
            let tp = typical_price(inputs);
            let n = tp.len();
            let mut pos = vec![f64::NAN; n];
            let mut neg = vec![f64::NAN; n];
            for t in 1..n {
                let flow = tp[t] * inputs.volume[t];
                pos[t] = if tp[t] > tp[t - 1] { flow } else { 0.0 };
                neg[t] = if tp[t] < tp[t - 1] { flow } else { 0.0 };
            }
            rolling::rolling2(&pos, &neg, w, |p, q| strength_index(p.iter().sum(), q.iter().sum()))
        }
        Family::Stoch => {
            let k = stoch_k(inputs, w);
            match variant {
                Some(Variant::D) => rolling::rolling(&k, STOCH_D_SMOOTHING, rolling::mean),
                _ => k,
            }
        }
        Family::Cci => {
            let tp = typical_price(inputs);
            rolling::rolling(&tp, w, |win| {
                let m = rolling::mean(win);
                let mad = win.iter().map(|x| (x - m).abs()).sum::<f64>() / win.len() as f64;
                ratio(win[win.len() - 1] - m, CCI_SCALE * mad)
            })
        }
        Family::Obv => {
            let mut acc = 0.0;
            inputs
                .ret
                .iter()
                .zip(&inputs.volume)
                .map(|(r, v)| {
                    if *r > 0.0 {
                        acc += v;
                    } else if *r < 0.0 {
                        acc -= v;
                    }
                    acc
                })
                .collect()
        }
        _ => unreachable!("not an oscillator family: {family}"),
    }
}

fn keep_nan(src: &[f64], mut out: Vec<f64>) -> Vec<f64> {
    for (o, s) in out.iter_mut().zip(src) {
        if s.is_nan() {
            *o = f64::NAN;
        }
    }
    out
}

/// 100 - 100 / (1 + up / down). One-sided windows saturate at 100 (no down
/// moves) or 0 (no up moves); a window with no moves at all is undefined.
pub(crate) fn strength_index(up: f64, down: f64) -> f64 {
    if down == 0.0 {
        if up > 0.0 {
            100.0
        } else {
            f64::NAN
        }
    } else {
        100.0 - 100.0 / (1.0 + up / down)
    }
}

fn typical_price(inputs: &Inputs) -> Vec<f64> {
    (0..inputs.len())
        .map(|t| (inputs.high[t] + inputs.low[t] + inputs.close[t]) / 3.0)
        .collect()
}

fn stoch_k(inputs: &Inputs, w: usize) -> Vec<f64> {
    let lo = rolling::rolling(&inputs.low, w, rolling::min);
    let hi = rolling::rolling(&inputs.high, w, rolling::max);
    (0..inputs.len())
        .map(|t| ratio(inputs.close[t] - lo[t], hi[t] - lo[t]) * 100.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use crate::factors::parse_factor_name;
    use crate::marketdata::{Bar, Day, OhlcvSeries};

    fn series(bars: &[(f64, f64, f64, f64, f64)]) -> OhlcvSeries {
        OhlcvSeries::new(
            "T",
            bars.iter()
                .enumerate()
                .map(|(i, &(open, high, low, close, volume))| Bar {
                    timestamp: Day(i as i64),
                    open,
                    high,
                    low,
                    close,
                    volume,
                })
                .collect(),
        )
    }

    fn closes(cs: &[f64]) -> OhlcvSeries {
        series(&cs.iter().map(|&c| (c, c + 0.5, c - 0.5, c, 100.0)).collect::<Vec<_>>())
    }

    #[test]
    fn rsi_one_sided_and_hand_value() {
        let up = closes(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rsi = parse_factor_name("rsi_3").unwrap().compute(&up);
        assert!(rsi[..3].iter().all(|v| v.is_nan()));
        assert!(rsi[3..].iter().all(|v| *v == 100.0));

        // gains 1, 0, 1, 0.5 and losses 0, 0.5, 0, 0 over the last four changes
        let s = closes(&[10.0, 11.0, 10.5, 11.5, 12.0]);
        let rsi = parse_factor_name("rsi_4").unwrap().compute(&s);
        let avg_gain = (1.0 + 0.0 + 1.0 + 0.5) / 4.0;
        let avg_loss = 0.5 / 4.0;
        let expected = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
        assert!((rsi[4] - expected).abs() < 1e-12);
        assert!((rsi[4] - 83.33333333333333).abs() < 1e-9);

        let flat = closes(&[5.0; 8]);
        assert!(parse_factor_name("rsi_3").unwrap().compute(&flat)[5].is_nan());
    }

    #[test]
    fn stoch_endpoints() {
        // close at window high, then at window low
        let s = series(&[
            (1.0, 2.0, 1.0, 1.5, 1.0),
            (1.5, 3.0, 1.2, 3.0, 1.0),
            (3.0, 3.0, 0.5, 0.5, 1.0),
        ]);
        let k = parse_factor_name("stoch_k_2").unwrap().compute(&s);
        assert_eq!(k[1], 100.0);
        assert_eq!(k[2], 0.0);
        let d = parse_factor_name("stoch_d_2").unwrap().compute(&s);
        assert!(d[..3].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn obv_starts_at_zero() {
        let s = closes(&[10.0, 11.0, 11.0, 9.0]);
        let obv = parse_factor_name("obv").unwrap().compute(&s);
        assert_eq!(obv, vec![0.0, 100.0, 100.0, 0.0]);
    }

    #[test]
    fn cci_flat_window_is_undefined() {
        let s = closes(&[7.0; 6]);
        let cci = parse_factor_name("cci_3").unwrap().compute(&s);
        assert!(cci.iter().all(|v| v.is_nan()));
    }
}
