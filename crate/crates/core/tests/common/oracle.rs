//! Slow reference implementations used only by tests.
//!
//! Every value is recomputed from the raw bars for each index with plain
//! loops and no shared helpers from the library, so an agreement between the
//! two is evidence rather than tautology.
#![allow(dead_code)]

use rulebench_core::dsl::{Arith, ArithOp, CmpOp, CrossDirection, CrossOperand, Expr, RuleSet};
use rulebench_core::Bar;

/// Tolerance scale: `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close_enough(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Deterministic bar generator independent of the library's synthetic data.
/// Prices sit on a 0.25 grid so ties and flat windows occur.
pub fn random_bars(seed: u64, len: usize) -> Vec<Bar> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (1u64 << 31) as f64
    };
    let mut close = 50.0 + 50.0 * next();
    (0..len)
        .map(|i| {
            let step = ((next() - 0.5) * 8.0).round() * 0.25;
            let open = close;
            close = (close + step).max(1.0);
            let high = open.max(close) + (next() * 4.0).floor() * 0.25;
            let low = (open.min(close) - (next() * 4.0).floor() * 0.25).max(0.25);
            let volume = if next() < 0.05 {
                0.0
            } else {
                (next() * 1000.0).floor() + 1.0
            };
            Bar {
                timestamp: rulebench_core::Day(i as i64),
                open,
                high,
                low,
                close,
                volume,
            }
        })
        .collect()
}

const NAN: f64 = f64::NAN;

fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn sstd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m) * (x - m);
    }
    (s / (xs.len() as f64 - 1.0)).sqrt()
}

fn div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        NAN
    } else {
        a / b
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma).powi(2);
        db += (b[i] - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        NAN
    } else {
        num / (da * db).sqrt()
    }
}

fn ema_at(xs: &[f64], seed: usize, t: usize, w: usize) -> f64 {
    let a = 2.0 / (w as f64 + 1.0);
    let mut e = xs[seed];
    for x in &xs[seed + 1..=t] {
        e = a * x + (1.0 - a) * e;
    }
    e
}

fn strength(up: f64, down: f64) -> f64 {
    if down == 0.0 {
        if up > 0.0 {
            100.0
        } else {
            NAN
        }
    } else {
        100.0 * up / (up + down)
    }
}

fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Bars elapsed since the first occurrence of the window extreme.
fn elapsed(xs: &[f64], want_max: bool) -> f64 {
    let target = if want_max {
        xs.iter().cloned().fold(f64::MIN, f64::max)
    } else {
        xs.iter().cloned().fold(f64::MAX, f64::min)
    };
    let first = xs.iter().position(|x| *x == target).unwrap();
    (xs.len() - 1 - first) as f64
}

/// Splits `rsi_14`, `bb_upper_20`, `macd_signal`, `klen` into (family, variant, period).
pub fn split_name(name: &str) -> (String, Option<String>, usize) {
    let mut parts: Vec<&str> = name.split('_').collect();
    let period = match parts.last().and_then(|p| p.parse::<usize>().ok()) {
        Some(p) => {
            parts.pop();
            p
        }
        None => 0,
    };
    let family = parts[0].to_string();
    let variant = parts.get(1).map(|s| s.to_string());
    (family, variant, period)
}

/// First index with a defined value, by documented convention.
pub fn documented_warmup(name: &str) -> usize {
    let (f, v, w) = split_name(name);
    match f.as_str() {
        "macd" => match v {
            None => 25,
            Some(_) => 33,
        },
        "obv" | "logvol" | "klen" | "kup" | "kup2" | "klow" | "klow2" | "kmid" | "kmid2" | "ksft" | "ksft2" => 0,
        "rsi" | "mfi" | "roc" | "beta" | "cord" | "wvma" | "cntp" | "cntn" | "cntd" | "sump" | "sumn" | "sumd"
        | "vsump" | "vsumn" | "vsumd" => w,
        "stoch" if v.as_deref() == Some("d") => w + 1,
        _ => w - 1,
    }
}

/// Reference value of a factor column at every bar.
pub fn factor(name: &str, bars: &[Bar]) -> Vec<f64> {
    let (fam, var, w) = split_name(name);
    let n = bars.len();
    let c: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let o: Vec<f64> = bars.iter().map(|b| b.open).collect();
    let h: Vec<f64> = bars.iter().map(|b| b.high).collect();
    let l: Vec<f64> = bars.iter().map(|b| b.low).collect();
    let v: Vec<f64> = bars.iter().map(|b| b.volume).collect();
    let tp: Vec<f64> = (0..n).map(|i| (h[i] + l[i] + c[i]) / 3.0).collect();
    let ret = |i: usize| c[i] / c[i - 1] - 1.0;
    let win = |xs: &[f64], t: usize| xs[t + 1 - w..=t].to_vec();
    // one-bar changes over the window: indices t-w+1 ..= t, each needing i >= 1
    let changes = |t: usize, f: &dyn Fn(usize) -> f64| -> Vec<f64> { (t + 1 - w..=t).map(f).collect() };
    let warm = documented_warmup(name);

    (0..n)
        .map(|t| {
            if t < warm {
                return NAN;
            }
            match fam.as_str() {
                "ema" => ema_at(&c, 0, t, w),
                "sma" => mean(&win(&c, t)),
                "ma" => div(mean(&win(&c, t)), c[t]),
                "bb" => {
                    let k = match var.as_deref() {
                        Some("upper") => 2.0,
                        Some("lower") => -2.0,
                        _ => 0.0,
                    };
                    mean(&win(&c, t)) + k * sstd(&win(&c, t))
                }
                "atr" => {
                    let tr: Vec<f64> = (t + 1 - w..=t)
                        .map(|i| {
                            if i == 0 {
                                h[0] - l[0]
                            } else {
                                let a = h[i] - l[i];
                                let b = (h[i] - c[i - 1]).abs();
                                let d = (l[i] - c[i - 1]).abs();
                                a.max(b).max(d)
                            }
                        })
                        .collect();
                    mean(&tr)
                }
                "macd" => {
                    let line = |i: usize| ema_at(&c, 0, i, 12) - ema_at(&c, 0, i, 26);
                    match var.as_deref() {
                        None => line(t),
                        Some(which) => {
                            let lines: Vec<f64> = (0..=t).map(|i| if i >= 25 { line(i) } else { 0.0 }).collect();
                            let sig = ema_at(&lines, 25, t, 9);
                            if which == "signal" {
                                sig
                            } else {
                                line(t) - sig
                            }
                        }
                    }
                }
                "roc" => div(c[t - w], c[t]),
                "max" => div(win(&c, t).iter().cloned().fold(f64::MIN, f64::max), c[t]),
                "min" => div(win(&c, t).iter().cloned().fold(f64::MAX, f64::min), c[t]),
                "rsi" => {
                    let d = changes(t, &|i| c[i] - c[i - 1]);
                    let up = mean(&d.iter().map(|x| if *x > 0.0 { *x } else { 0.0 }).collect::<Vec<_>>());
                    let dn = mean(&d.iter().map(|x| if *x < 0.0 { -*x } else { 0.0 }).collect::<Vec<_>>());
                    strength(up, dn)
                }
                "mfi" => {
                    let mut up = 0.0;
                    let mut dn = 0.0;
                    for i in t + 1 - w..=t {
                        let flow = tp[i] * v[i];
                        if tp[i] > tp[i - 1] {
                            up += flow;
                        } else if tp[i] < tp[i - 1] {
                            dn += flow;
                        }
                    }
                    strength(up, dn)
                }
                "stoch" => {
                    let k_at = |s: usize| {
                        let lo = l[s + 1 - w..=s].iter().cloned().fold(f64::MAX, f64::min);
                        let hi = h[s + 1 - w..=s].iter().cloned().fold(f64::MIN, f64::max);
                        div(c[s] - lo, hi - lo) * 100.0
                    };
                    match var.as_deref() {
                        Some("d") => (k_at(t) + k_at(t - 1) + k_at(t - 2)) / 3.0,
                        _ => k_at(t),
                    }
                }
                "cci" => {
                    let x = win(&tp, t);
                    let m = mean(&x);
                    let mad = x.iter().map(|a| (a - m).abs()).sum::<f64>() / w as f64;
                    div(tp[t] - m, 0.015 * mad)
                }
                "obv" => {
                    let mut acc = 0.0;
                    for i in 1..=t {
                        if c[i] > c[i - 1] {
                            acc += v[i];
                        } else if c[i] < c[i - 1] {
                            acc -= v[i];
                        }
                    }
                    acc
                }
                "std" => div(sstd(&win(&c, t)), c[t]),
                "vstd" => div(sstd(&win(&v, t)), v[t]),
                "beta" => div(c[t - w] - c[t], w as f64 * c[t]),
                "corr" => {
                    if win(&v, t).iter().any(|x| *x <= 0.0) {
                        NAN
                    } else {
                        let lv: Vec<f64> = win(&v, t).iter().map(|x| x.ln()).collect();
                        pearson(&win(&c, t), &lv)
                    }
                }
                "cord" => pearson(&changes(t, &|i| c[i] - c[i - 1]), &changes(t, &|i| v[i] - v[i - 1])),
                "rank" => {
                    let x = win(&c, t);
                    x.iter().filter(|a| **a < c[t]).count() as f64 / w as f64
                }
                "imax" => elapsed(&win(&h, t), true) / w as f64,
                "imin" => elapsed(&win(&l, t), false) / w as f64,
                "imxd" => (elapsed(&win(&h, t), true) - elapsed(&win(&l, t), false)) / w as f64,
                "rsv" => {
                    let lo = win(&l, t).iter().cloned().fold(f64::MAX, f64::min);
                    let hi = win(&h, t).iter().cloned().fold(f64::MIN, f64::max);
                    div(c[t] - lo, hi - lo)
                }
                "qtlu" => div(c[t] - quantile(&win(&c, t), 0.8), c[t]),
                "qtld" => div(c[t] - quantile(&win(&c, t), 0.2), c[t]),
                "klen" => div(h[t] - l[t], o[t]),
                "kup" => div(h[t] - o[t].max(c[t]), o[t]),
                "kup2" => div(h[t] - o[t].max(c[t]), h[t] - l[t]),
                "klow" => div(o[t].min(c[t]) - l[t], o[t]),
                "klow2" => div(o[t].min(c[t]) - l[t], h[t] - l[t]),
                "kmid" => div(c[t] - o[t], c[t]),
                "kmid2" => div(c[t] - o[t], h[t] - l[t]),
                "ksft" => div(2.0 * c[t] - h[t] - l[t], o[t]),
                "ksft2" => div(2.0 * c[t] - h[t] - l[t], h[t] - l[t]),
                "vma" => div(mean(&win(&v, t)), v[t]),
                "logvol" => (1.0 + v[t]).ln(),
                "wvma" => {
                    let x = changes(t, &|i| ret(i).abs() * v[i]);
                    div(sstd(&x), mean(&x))
                }
                "cntp" | "cntn" | "cntd" => {
                    let r = changes(t, &|i| ret(i));
                    let p = r.iter().filter(|x| **x > 0.0).count() as f64 / w as f64;
                    let q = r.iter().filter(|x| **x < 0.0).count() as f64 / w as f64;
                    match fam.as_str() {
                        "cntp" => p,
                        "cntn" => q,
                        _ => p - q,
                    }
                }
                "sump" | "sumn" | "sumd" | "vsump" | "vsumn" | "vsumd" => {
                    let r = if fam.starts_with('v') {
                        changes(t, &|i| v[i] - v[i - 1])
                    } else {
                        changes(t, &|i| ret(i))
                    };
                    let pos: f64 = r.iter().filter(|x| **x > 0.0).sum();
                    let neg: f64 = r.iter().filter(|x| **x < 0.0).map(|x| -x).sum();
                    let share = div(pos, pos + neg);
                    match &fam[fam.len() - 1..] {
                        "p" => share,
                        "n" => div(neg, pos + neg),
                        _ => div(pos - neg, pos + neg),
                    }
                }
                other => panic!("oracle has no family {other}"),
            }
        })
        .collect()
}

/// Every column name exercised by the oracle suite at period `w`.
pub fn catalog(w: usize) -> Vec<String> {
    let periodic = [
        "ema",
        "sma",
        "ma",
        "bb_upper",
        "bb_middle",
        "bb_lower",
        "atr",
        "roc",
        "max",
        "min",
        "rsi",
        "mfi",
        "stoch_k",
        "stoch_d",
        "cci",
        "std",
        "vstd",
        "beta",
        "corr",
        "cord",
        "rank",
        "imax",
        "imin",
        "imxd",
        "rsv",
        "qtlu",
        "qtld",
        "vma",
        "wvma",
        "cntp",
        "cntn",
        "cntd",
        "sump",
        "sumn",
        "sumd",
        "vsump",
        "vsumn",
        "vsumd",
    ];
    let fixed = [
        "macd",
        "macd_signal",
        "macd_hist",
        "obv",
        "logvol",
        "klen",
        "kup",
        "kup2",
        "klow",
        "klow2",
        "kmid",
        "kmid2",
        "ksft",
        "ksft2",
    ];
    periodic
        .iter()
        .map(|f| format!("{f}_{w}"))
        .chain(fixed.iter().map(|f| f.to_string()))
        .collect()
}

// ---- metrics ----

pub fn arr(rets: &[f64], n: f64) -> f64 {
    let growth: f64 = rets.iter().map(|r| 1.0 + r).product();
    growth.powf(n / rets.len() as f64) - 1.0
}

pub fn sharpe(rets: &[f64], rf: f64, n: f64) -> f64 {
    (mean(rets) - rf) / sstd(rets) * n.sqrt()
}

pub fn vol(rets: &[f64], n: f64) -> f64 {
    sstd(rets) * n.sqrt()
}

/// Largest (V_i − V_j)/V_i over all i <= j.
pub fn mdd(equity: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..equity.len() {
        for j in i..equity.len() {
            worst = worst.max((equity[i] - equity[j]) / equity[i]);
        }
    }
    worst
}

pub fn downside_per_period(rets: &[f64], rf: f64) -> f64 {
    let s: f64 = rets.iter().map(|r| if r < &rf { (r - rf).powi(2) } else { 0.0 }).sum();
    (s / rets.len() as f64).sqrt()
}

pub fn dd(rets: &[f64], rf: f64, n: f64) -> f64 {
    downside_per_period(rets, rf) * n.sqrt()
}

pub fn sortino(rets: &[f64], rf: f64, n: f64) -> f64 {
    (mean(rets) - rf) / downside_per_period(rets, rf) * n.sqrt()
}

pub fn equity_from(rets: &[f64], v0: f64) -> Vec<f64> {
    let mut out = vec![v0];
    for r in rets {
        let last = *out.last().unwrap();
        out.push(last * (1.0 + r));
    }
    out
}

// ---- rule interpreter ----

/// Column lookup used by the interpreter: full column by name.
pub trait Columns {
    fn col(&self, name: &str) -> Vec<f64>;
}

impl<F: Fn(&str) -> Vec<f64>> Columns for F {
    fn col(&self, name: &str) -> Vec<f64> {
        self(name)
    }
}

/// Evaluates an arithmetic node for every bar at once.
fn arith_all(a: &Arith, cols: &dyn Columns, n: usize) -> Vec<f64> {
    match a {
        Arith::Number(x) => vec![*x; n],
        Arith::Column(c) => cols.col(c),
        Arith::Prev(c, k) => {
            let src = cols.col(c);
            let k = *k as usize;
            (0..n).map(|t| if t >= k { src[t - k] } else { NAN }).collect()
        }
        Arith::Binary { op, lhs, rhs } => {
            let l = arith_all(lhs, cols, n);
            let r = arith_all(rhs, cols, n);
            (0..n)
                .map(|t| match op {
                    ArithOp::Add => l[t] + r[t],
                    ArithOp::Sub => l[t] - r[t],
                    ArithOp::Mul => l[t] * r[t],
                    ArithOp::Div => {
                        if r[t] == 0.0 {
                            NAN
                        } else {
                            l[t] / r[t]
                        }
                    }
                })
                .collect()
        }
    }
}

/// Per-bar (holds, touched-missing-data) for a condition.
fn cond_all(e: &Expr, cols: &dyn Columns, n: usize) -> Vec<(bool, bool)> {
    let cmp = |a: f64, op: CmpOp, b: f64| -> (bool, bool) {
        if a.is_nan() || b.is_nan() {
            return (false, true);
        }
        let v = match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        };
        (v, false)
    };
    match e {
        Expr::Compare { lhs, op, rhs } => {
            let l = arith_all(lhs, cols, n);
            let r = arith_all(rhs, cols, n);
            (0..n).map(|t| cmp(l[t], *op, r[t])).collect()
        }
        Expr::Cross { direction, left, right } => {
            let a = cols.col(left);
            let b = match right {
                CrossOperand::Column(c) => cols.col(c),
                CrossOperand::Number(x) => vec![*x; n],
            };
            (0..n)
                .map(|t| {
                    let (pa, pb) = if t == 0 { (NAN, NAN) } else { (a[t - 1], b[t - 1]) };
                    let (before, now) = match direction {
                        CrossDirection::Above => (cmp(pa, CmpOp::Le, pb), cmp(a[t], CmpOp::Gt, b[t])),
                        CrossDirection::Below => (cmp(pa, CmpOp::Ge, pb), cmp(a[t], CmpOp::Lt, b[t])),
                    };
                    (before.0 && now.0, before.1 || now.1)
                })
                .collect()
        }
        Expr::Not(x) => cond_all(x, cols, n)
            .into_iter()
            .map(|(v, m)| if m { (false, true) } else { (!v, false) })
            .collect(),
        Expr::And(xs) | Expr::Or(xs) => {
            let is_and = matches!(e, Expr::And(_));
            let parts: Vec<Vec<(bool, bool)>> = xs.iter().map(|x| cond_all(x, cols, n)).collect();
            (0..n)
                .map(|t| {
                    let vals = parts.iter().map(|p| p[t].0);
                    let v = if is_and {
                        vals.clone().all(|b| b)
                    } else {
                        vals.clone().any(|b| b)
                    };
                    (v, parts.iter().any(|p| p[t].1))
                })
                .collect()
        }
    }
}

/// Decision (signal, position) at every bar under first-match-wins.
pub fn decisions(rules: &RuleSet, cols: &dyn Columns, n: usize) -> Vec<(i8, f64)> {
    let conds: Vec<Vec<(bool, bool)>> = rules.rules.iter().map(|r| cond_all(&r.condition, cols, n)).collect();
    (0..n)
        .map(|t| {
            for (k, r) in rules.rules.iter().enumerate() {
                if conds[k][t].0 {
                    return (r.signal, r.position);
                }
            }
            (0, 0.0)
        })
        .collect()
}
