//! Precomputed factor catalog.
//!
//! Factor columns are named `{family}_{period}`, `{family}_{variant}_{period}`
//! or just `{family}` for parameterless families (`macd`, `obv`, `logvol`, the
//! candlestick shapes). Every column is causal: the value at bar `t` reads only
//! bars `0..=t`. Undefined entries (warm-up, zero denominators) are `NaN`.

mod candlestick;
mod counting;
mod frame;
mod oscillators;
mod position;
pub(crate) mod rolling;
mod statistical;
mod trend;
mod volume;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::OhlcvSeries;

pub use frame::{compute_frame, FactorFrame, RAW_COLUMNS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("unknown factor '{0}'")]
    UnknownFamily(String),
    #[error("factor '{0}' requires a period, e.g. '{0}_14'")]
    MissingPeriod(String),
    #[error("factor '{0}' takes no period")]
    ForbiddenPeriod(String),
    #[error("factor '{0}' has a non-positive period")]
    NonPositivePeriod(String),
    #[error("factor '{0}' has a malformed period")]
    MalformedPeriod(String),
    #[error("factor '{name}' needs a period of at least {min}")]
    PeriodTooSmall { name: String, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ema,
    Sma,
    Ma,
    Rsi,
    Macd,
    Bb,
    Atr,
    Cci,
    Mfi,
    Obv,
    Roc,
    Stoch,
    Std,
    Vstd,
    Beta,
    Corr,
    Cord,
    Max,
    Min,
    Rank,
    Imax,
    Imin,
    Imxd,
    Rsv,
    Qtlu,
    Qtld,
    Klen,
    Kup,
    Kup2,
    Klow,
    Klow2,
    Kmid,
    Kmid2,
    Ksft,
    Ksft2,
    Vma,
    Logvol,
    Wvma,
    Cntp,
    Cntn,
    Cntd,
    Sump,
    Sumn,
    Sumd,
    Vsump,
    Vsumn,
    Vsumd,
}

impl Family {
    pub const ALL: [Family; 47] = [
        Family::Ema,
        Family::Sma,
        Family::Ma,
        Family::Rsi,
        Family::Macd,
        Family::Bb,
        Family::Atr,
        Family::Cci,
        Family::Mfi,
        Family::Obv,
        Family::Roc,
        Family::Stoch,
        Family::Std,
        Family::Vstd,
        Family::Beta,
        Family::Corr,
        Family::Cord,
        Family::Max,
        Family::Min,
        Family::Rank,
        Family::Imax,
        Family::Imin,
        Family::Imxd,
        Family::Rsv,
        Family::Qtlu,
        Family::Qtld,
        Family::Klen,
        Family::Kup,
        Family::Kup2,
        Family::Klow,
        Family::Klow2,
        Family::Kmid,
        Family::Kmid2,
        Family::Ksft,
        Family::Ksft2,
        Family::Vma,
        Family::Logvol,
        Family::Wvma,
        Family::Cntp,
        Family::Cntn,
        Family::Cntd,
        Family::Sump,
        Family::Sumn,
        Family::Sumd,
        Family::Vsump,
        Family::Vsumn,
        Family::Vsumd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ema => "ema",
            Family::Sma => "sma",
            Family::Ma => "ma",
            Family::Rsi => "rsi",
            Family::Macd => "macd",
            Family::Bb => "bb",
            Family::Atr => "atr",
            Family::Cci => "cci",
            Family::Mfi => "mfi",
            Family::Obv => "obv",
            Family::Roc => "roc",
            Family::Stoch => "stoch",
            Family::Std => "std",
            Family::Vstd => "vstd",
            Family::Beta => "beta",
            Family::Corr => "corr",
            Family::Cord => "cord",
            Family::Max => "max",
            Family::Min => "min",
            Family::Rank => "rank",
            Family::Imax => "imax",
            Family::Imin => "imin",
            Family::Imxd => "imxd",
            Family::Rsv => "rsv",
            Family::Qtlu => "qtlu",
            Family::Qtld => "qtld",
            Family::Klen => "klen",
            Family::Kup => "kup",
            Family::Kup2 => "kup2",
            Family::Klow => "klow",
            Family::Klow2 => "klow2",
            Family::Kmid => "kmid",
            Family::Kmid2 => "kmid2",
            Family::Ksft => "ksft",
            Family::Ksft2 => "ksft2",
            Family::Vma => "vma",
            Family::Logvol => "logvol",
            Family::Wvma => "wvma",
            Family::Cntp => "cntp",
            Family::Cntn => "cntn",
            Family::Cntd => "cntd",
            Family::Sump => "sump",
            Family::Sumn => "sumn",
            Family::Sumd => "sumd",
            Family::Vsump => "vsump",
            Family::Vsumn => "vsumn",
            Family::Vsumd => "vsumd",
        }
    }

    fn from_token(token: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.as_str() == token)
    }

    pub fn takes_period(self) -> bool {
        !matches!(
            self,
            Family::Macd
                | Family::Obv
                | Family::Logvol
                | Family::Klen
                | Family::Kup
                | Family::Kup2
                | Family::Klow
                | Family::Klow2
                | Family::Kmid
                | Family::Kmid2
                | Family::Ksft
                | Family::Ksft2
        )
    }

    /// Smallest admissible period; sample-variance based families need two points.
    pub fn min_period(self) -> usize {
        match self {
            Family::Std | Family::Vstd | Family::Corr | Family::Cord | Family::Wvma | Family::Bb => 2,
            _ => 1,
        }
    }

    fn variants(self) -> &'static [Variant] {
        match self {
            Family::Bb => &[Variant::Upper, Variant::Middle, Variant::Lower],
            Family::Macd => &[Variant::Signal, Variant::Hist],
            Family::Stoch => &[Variant::K, Variant::D],
            _ => &[],
        }
    }

    /// Whether the bare family name (no variant) is a valid column.
    fn variant_optional(self) -> bool {
        !matches!(self, Family::Bb | Family::Stoch)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sub-series selector for multi-line indicators. `macd` without a variant is the MACD line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Upper,
    Middle,
    Lower,
    Signal,
    Hist,
    K,
    D,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Upper => "upper",
            Variant::Middle => "middle",
            Variant::Lower => "lower",
            Variant::Signal => "signal",
            Variant::Hist => "hist",
            Variant::K => "k",
            Variant::D => "d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactorSpec {
    pub family: Family,
    pub variant: Option<Variant>,
    pub period: Option<usize>,
}

impl FactorSpec {
    pub fn name(&self) -> String {
        let mut s = self.family.as_str().to_string();
        if let Some(v) = self.variant {
            s.push('_');
            s.push_str(v.as_str());
        }
        if let Some(p) = self.period {
            s.push('_');
            s.push_str(&p.to_string());
        }
        s
    }

    /// Number of leading bars that are always undefined for this column.
    pub fn warmup(&self) -> usize {
        let w = self.period.unwrap_or(0);
        match self.family {
            Family::Macd => match self.variant {
                None => trend::MACD_SLOW - 1,
                Some(_) => trend::MACD_SLOW - 1 + trend::MACD_SIGNAL - 1,
            },
            Family::Obv | Family::Logvol => 0,
            Family::Klen
            | Family::Kup
            | Family::Kup2
            | Family::Klow
            | Family::Klow2
            | Family::Kmid
            | Family::Kmid2
            | Family::Ksft
            | Family::Ksft2 => 0,
            // one-bar differences are undefined at bar 0
            Family::Rsi
            | Family::Mfi
            | Family::Roc
            | Family::Beta
            | Family::Cord
            | Family::Wvma
            | Family::Cntp
            | Family::Cntn
            | Family::Cntd
            | Family::Sump
            | Family::Sumn
            | Family::Sumd
            | Family::Vsump
            | Family::Vsumn
            | Family::Vsumd => w,
            Family::Stoch if self.variant == Some(Variant::D) => w - 1 + oscillators::STOCH_D_SMOOTHING - 1,
            _ => w - 1,
        }
    }

    pub fn compute(&self, series: &OhlcvSeries) -> Vec<f64> {
        let inputs = rolling::Inputs::new(series);
        self.compute_from(&inputs)
    }

    pub(crate) fn compute_from(&self, inputs: &rolling::Inputs) -> Vec<f64> {
        let w = self.period.unwrap_or(0);
        match self.family {
            Family::Ema
            | Family::Sma
            | Family::Ma
            | Family::Bb
            | Family::Atr
            | Family::Macd
            | Family::Roc
            | Family::Max
            | Family::Min => trend::compute(inputs, self.family, self.variant, w),
            Family::Rsi | Family::Mfi | Family::Stoch | Family::Cci | Family::Obv => {
                oscillators::compute(inputs, self.family, self.variant, w)
            }
            Family::Std | Family::Vstd | Family::Beta | Family::Corr | Family::Cord => {
                statistical::compute(inputs, self.family, w)
            }
            Family::Rank | Family::Imax | Family::Imin | Family::Imxd | Family::Rsv | Family::Qtlu | Family::Qtld => {
                position::compute(inputs, self.family, w)
            }
            Family::Klen
            | Family::Kup
            | Family::Kup2
            | Family::Klow
            | Family::Klow2
            | Family::Kmid
            | Family::Kmid2
            | Family::Ksft
            | Family::Ksft2 => candlestick::compute(inputs, self.family),
            Family::Vma | Family::Logvol | Family::Wvma => volume::compute(inputs, self.family, w),
            Family::Cntp
            | Family::Cntn
            | Family::Cntd
            | Family::Sump
            | Family::Sumn
            | Family::Sumd
            | Family::Vsump
            | Family::Vsumn
            | Family::Vsumd => counting::compute(inputs, self.family, w),
        }
    }
}

impl fmt::Display for FactorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FactorSpec {
    type Err = FactorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_factor_name(s)
    }
}

pub fn parse_factor_name(name: &str) -> Result<FactorSpec, FactorError> {
    let unknown = || FactorError::UnknownFamily(name.to_string());
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        return Err(unknown());
    }
    let mut tokens: Vec<&str> = name.split('_').collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(unknown());
    }

    let mut period_token = None;
    if tokens.len() > 1 && tokens[tokens.len() - 1].bytes().all(|b| b.is_ascii_digit()) {
        period_token = tokens.pop();
    }
    let family = Family::from_token(tokens[0]).ok_or_else(unknown)?;
    let variant = match &tokens[1..] {
        [] if family.variant_optional() => None,
        [] => return Err(unknown()),
        [v] => Some(
            *family
                .variants()
                .iter()
                .find(|x| x.as_str() == *v)
                .ok_or_else(unknown)?,
        ),
        _ => return Err(unknown()),
    };

    let period = match period_token {
        None if family.takes_period() => return Err(FactorError::MissingPeriod(name.to_string())),
        None => None,
        Some(_) if !family.takes_period() => return Err(FactorError::ForbiddenPeriod(name.to_string())),
        Some(tok) => {
            if tok.len() > 1 && tok.starts_with('0') && tok.bytes().any(|b| b != b'0') {
                return Err(FactorError::MalformedPeriod(name.to_string()));
            }
            let p: usize = tok
                .parse()
                .map_err(|_| FactorError::MalformedPeriod(name.to_string()))?;
            if p == 0 {
                return Err(FactorError::NonPositivePeriod(name.to_string()));
            }
            if p < family.min_period() {
                return Err(FactorError::PeriodTooSmall {
                    name: name.to_string(),
                    min: family.min_period(),
                });
            }
            Some(p)
        }
    };
    Ok(FactorSpec {
        family,
        variant,
        period,
    })
}
