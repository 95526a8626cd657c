//! Up/down day counts and signed move sums over a window.

use super::rolling::{self, ratio, Inputs};
use super::Family;

pub(super) fn compute(inputs: &Inputs, family: Family, w: usize) -> Vec<f64> {
    let ret = &inputs.ret;
    let wf = w as f64;
    match family {
        Family::Cntp => rolling::rolling(ret, w, |win| count(win, |r| r > 0.0) / wf),
        Family::Cntn => rolling::rolling(ret, w, |win| count(win, |r| r < 0.0) / wf),
        Family::Cntd => rolling::rolling(ret, w, |win| {
            count(win, |r| r > 0.0) / wf - count(win, |r| r < 0.0) / wf
        }),
        Family::Sump | Family::Sumn | Family::Sumd => derive(rolling::rolling(ret, w, positive_share), family),
        Family::Vsump | Family::Vsumn | Family::Vsumd => {
            let dv = rolling::diff_with(&inputs.volume, |p, c| c - p);
            derive(rolling::rolling(&dv, w, positive_share), family)
        }
        _ => unreachable!("not a counting family: {family}"),
    }
}

fn count(win: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    win.iter().filter(|r| pred(**r)).count() as f64
}

/// Σ max(x, 0) / Σ |x|, undefined when every move is zero.
fn positive_share(win: &[f64]) -> f64 {
    let pos: f64 = win.iter().map(|x| x.max(0.0)).sum();
    let abs: f64 = win.iter().map(|x| x.abs()).sum();
    ratio(pos, abs)
}

fn derive(share: Vec<f64>, family: Family) -> Vec<f64> {
    match family {
        Family::Sump | Family::Vsump => share,
        Family::Sumn | Family::Vsumn => share.iter().map(|p| 1.0 - p).collect(),
        _ => share.iter().map(|p| 2.0 * p - 1.0).collect(),
    }
}
