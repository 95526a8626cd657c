//! Seeded synthetic daily bars for tests, demos and smoke runs.

use crate::marketdata::{Bar, Day, OhlcvSeries};

/// SplitMix64; small, fast and identical on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkParams {
    pub start_price: f64,
    /// Per-bar log drift.
    pub drift: f64,
    /// Per-bar log volatility.
    pub volatility: f64,
    pub base_volume: f64,
    pub start_day: Day,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            start_price: 100.0,
            drift: 0.0003,
            volatility: 0.02,
            base_volume: 1_000_000.0,
            start_day: Day::from_ymd(2020, 1, 1).expect("valid date"),
        }
    }
}

/// Geometric random walk with consistent OHLC bars on consecutive days.
pub fn random_walk(symbol: &str, len: usize, seed: u64, p: &WalkParams) -> OhlcvSeries {
    let mut rng = SplitMix64::new(seed);
    let mut prev = p.start_price;
    let bars = (0..len)
        .map(|i| {
            let open = prev * (0.25 * p.volatility * rng.normal()).exp();
            let close = prev * (p.drift + p.volatility * rng.normal()).exp();
            let high = open.max(close) * (1.0 + 0.5 * p.volatility * rng.normal().abs());
            let low = open.min(close) * (1.0 - 0.5 * p.volatility * rng.normal().abs()).max(0.01);
            let volume = (p.base_volume * (0.3 * rng.normal()).exp()).round();
            prev = close;
            Bar {
                timestamp: Day(p.start_day.0 + i as i64),
                open,
                high,
                low,
                close,
                volume,
            }
        })
        .collect();
    OhlcvSeries::new(symbol, bars)
}
