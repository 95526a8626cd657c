//! Daily OHLCV bars: loading, validation and lookback windows.
//!
//! Timestamps are held as integer days since 1970-01-01. Input files may carry
//! ISO-8601 dates (`2021-01-01`, optionally followed by a time part) or integer
//! epoch milliseconds, which covers both exchange and equity-vendor exports.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MILLIS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row}: cannot parse timestamp '{value}'")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("row {row}: cannot parse {column} value '{value}'")]
    UnparseableNumber { row: usize, column: String, value: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(Day),
    #[error("insufficient history: end index {end_index} with lookback {lookback}")]
    InsufficientHistory { end_index: usize, lookback: usize },
    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Calendar day as days since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i64);

impl Day {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day::from_date)
    }

    fn from_date(date: NaiveDate) -> Day {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        Day(date.signed_duration_since(epoch).num_days())
    }

    pub fn to_date(self) -> NaiveDate {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        epoch + chrono::Duration::days(self.0)
    }

    /// Parses `YYYY-MM-DD` (time suffix tolerated) or integer epoch milliseconds.
    pub fn parse(text: &str) -> Option<Day> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        if let Ok(ms) = text.parse::<i64>() {
            return Some(Day(ms.div_euclid(MILLIS_PER_DAY)));
        }
        if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
            return Some(Day::from_date(date));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(text.trim_end_matches('Z'), fmt) {
                return Some(Day::from_date(dt.date()));
            }
        }
        None
    }
}

impl Serialize for Day {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Day {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Day, D::Error> {
        let text = String::deserialize(d)?;
        Day::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("bad date '{text}'")))
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub timestamp: Day,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// Time-ordered bars for one asset. Index 0 is the oldest bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvSeries {
    pub symbol: String,
    bars: Vec<Bar>,
}

impl OhlcvSeries {
    /// Wraps bars as-is. Use [`validate`] to check ordering and consistency.
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Self {
        OhlcvSeries {
            symbol: symbol.into(),
            bars,
        }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn timestamps(&self) -> Vec<Day> {
        self.bars.iter().map(|b| b.timestamp).collect()
    }

    pub fn opens(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.open).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    /// Writes the canonical CSV form (`timestamp,open,high,low,close,volume`).
    /// Prices use the shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "timestamp,open,high,low,close,volume")?;
        for b in &self.bars {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                b.timestamp, b.open, b.high, b.low, b.close, b.volume
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Column names used when reading a CSV. Matching is case-insensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp: "timestamp".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

impl CsvSchema {
    /// Yahoo Finance daily export (`Date,Open,High,Low,Close,Adj Close,Volume`).
    pub fn yahoo() -> Self {
        CsvSchema {
            timestamp: "date".into(),
            ..CsvSchema::default()
        }
    }

    /// Binance kline dump with an `open_time` column in epoch milliseconds.
    pub fn binance() -> Self {
        CsvSchema {
            timestamp: "open_time".into(),
            ..CsvSchema::default()
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<OhlcvSeries, MarketDataError> {
    let path = path.as_ref();
    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = File::open(path)?;
    read_csv(file, &symbol, schema)
}

/// Reads bars from any CSV source, sorting ascending and rejecting duplicate days.
pub fn read_csv<R: Read>(reader: R, symbol: &str, schema: &CsvSchema) -> Result<OhlcvSeries, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize, MarketDataError> {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| MarketDataError::MissingColumn(name.to_string()))
    };
    let cols = [
        find(&schema.timestamp)?,
        find(&schema.open)?,
        find(&schema.high)?,
        find(&schema.low)?,
        find(&schema.close)?,
        find(&schema.volume)?,
    ];
    let names = [&schema.open, &schema.high, &schema.low, &schema.close, &schema.volume];

    let mut bars = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = i + 2;
        let raw_ts = record.get(cols[0]).unwrap_or("");
        let timestamp = Day::parse(raw_ts).ok_or_else(|| MarketDataError::UnparseableTimestamp {
            row,
            value: raw_ts.to_string(),
        })?;
        let mut values = [0.0; 5];
        for (k, slot) in values.iter_mut().enumerate() {
            let raw = record.get(cols[k + 1]).unwrap_or("");
            *slot = raw.parse::<f64>().map_err(|_| MarketDataError::UnparseableNumber {
                row,
                column: names[k].clone(),
                value: raw.to_string(),
            })?;
        }
        bars.push(Bar {
            timestamp,
            open: values[0],
            high: values[1],
            low: values[2],
            close: values[3],
            volume: values[4],
        });
    }
    if bars.is_empty() {
        return Err(MarketDataError::EmptyFile);
    }
    bars.sort_by_key(|b| b.timestamp);
    if let Some(dup) = bars.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(MarketDataError::DuplicateTimestamp(dup[0].timestamp));
    }
    Ok(OhlcvSeries::new(symbol, bars))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub index: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

pub fn validate(series: &OhlcvSeries) -> ValidationReport {
    validate_with(series, false)
}

/// Strict mode upgrades OHLC-consistency and zero-volume warnings to errors.
pub fn validate_with(series: &OhlcvSeries, strict: bool) -> ValidationReport {
    let soft = if strict { Severity::Error } else { Severity::Warning };
    let mut findings = Vec::new();
    for (i, b) in series.bars().iter().enumerate() {
        if i > 0 && b.timestamp <= series.bars()[i - 1].timestamp {
            findings.push(Finding {
                index: i,
                severity: Severity::Error,
                message: format!(
                    "timestamp {} does not follow {}",
                    b.timestamp,
                    series.bars()[i - 1].timestamp
                ),
            });
        }
        let prices = [b.open, b.high, b.low, b.close, b.volume];
        if prices.iter().any(|p| !p.is_finite()) {
            findings.push(Finding {
                index: i,
                severity: Severity::Error,
                message: "non-finite value".into(),
            });
            continue;
        }
        if b.volume < 0.0 {
            findings.push(Finding {
                index: i,
                severity: Severity::Error,
                message: format!("negative volume {}", b.volume),
            });
        } else if b.volume == 0.0 {
            findings.push(Finding {
                index: i,
                severity: soft,
                message: "zero volume".into(),
            });
        }
        if b.high < b.open.max(b.close) {
            findings.push(Finding {
                index: i,
                severity: soft,
                message: format!("high {} below max(open, close)", b.high),
            });
        }
        if b.low > b.open.min(b.close) {
            findings.push(Finding {
                index: i,
                severity: soft,
                message: format!("low {} above min(open, close)", b.low),
            });
        }
    }
    ValidationReport { findings }
}

/// The `lookback` bars ending at (and including) `end_index`.
pub fn window(series: &OhlcvSeries, end_index: usize, lookback: usize) -> Result<OhlcvSeries, MarketDataError> {
    if end_index >= series.len() {
        return Err(MarketDataError::IndexOutOfRange {
            index: end_index,
            len: series.len(),
        });
    }
    if lookback == 0 || end_index + 1 < lookback {
        return Err(MarketDataError::InsufficientHistory { end_index, lookback });
    }
    let start = end_index + 1 - lookback;
    Ok(OhlcvSeries::new(
        series.symbol.clone(),
        series.bars[start..=end_index].to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(day: i64, close: f64) -> Bar {
        Bar {
            timestamp: Day(day),
            open: close,
            high: close + 1.0,
            low: close - 1.0,
            close,
            volume: 10.0,
        }
    }

    #[test]
    fn loads_well_formed_csv() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2021-01-01,1,2,0.5,1.5,100\n\
                    2021-01-02,1.5,2.5,1,2,200\n\
                    2021-01-03,2,3,1.5,2.5,300\n";
        let s = read_csv(text.as_bytes(), "X", &CsvSchema::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.bars()[0].timestamp, Day::from_ymd(2021, 1, 1).unwrap());
        assert!(s.bars().windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn descending_rows_are_sorted() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2021-01-03,2,3,1.5,2.5,300\n\
                    2021-01-02,1.5,2.5,1,2,200\n\
                    2021-01-01,1,2,0.5,1.5,100\n";
        let s = read_csv(text.as_bytes(), "X", &CsvSchema::default()).unwrap();
        assert_eq!(s.closes(), vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2021-01-01,1,2,0.5,1.5,100\n\
                    2021-01-01,1.5,2.5,1,2,200\n";
        let err = read_csv(text.as_bytes(), "X", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, MarketDataError::DuplicateTimestamp(_)));
    }

    #[test]
    fn epoch_millis_and_missing_columns() {
        let text = "open_time,open,high,low,close,volume\n1609459200000,1,2,0.5,1.5,100\n";
        let s = read_csv(text.as_bytes(), "BTC", &CsvSchema::binance()).unwrap();
        assert_eq!(s.bars()[0].timestamp.to_string(), "2021-01-01");

        let err = read_csv(text.as_bytes(), "BTC", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, MarketDataError::MissingColumn(c) if c == "timestamp"));

        let empty = "timestamp,open,high,low,close,volume\n";
        assert!(matches!(
            read_csv(empty.as_bytes(), "X", &CsvSchema::default()),
            Err(MarketDataError::EmptyFile)
        ));
        let bad = "timestamp,open,high,low,close,volume\nyesterday,1,1,1,1,1\n";
        assert!(matches!(
            read_csv(bad.as_bytes(), "X", &CsvSchema::default()),
            Err(MarketDataError::UnparseableTimestamp { row: 2, .. })
        ));
    }

    #[test]
    fn yahoo_header_is_case_insensitive() {
        let text = "Date,Open,High,Low,Close,Adj Close,Volume\n2024-03-01,10,11,9,10.5,10.4,1000\n";
        let s = read_csv(text.as_bytes(), "AAPL", &CsvSchema::yahoo()).unwrap();
        assert_eq!(s.bars()[0].close, 10.5);
    }

    #[test]
    fn validation_findings() {
        let mut bars: Vec<Bar> = (0..4).map(|i| bar(i, 10.0)).collect();
        assert!(validate(&OhlcvSeries::new("X", bars.clone())).is_empty());

        bars[1].high = 9.0;
        bars[2].volume = 0.0;
        let report = validate(&OhlcvSeries::new("X", bars.clone()));
        assert!(!report.has_errors());
        let idx: Vec<usize> = report.warnings().map(|f| f.index).collect();
        assert_eq!(idx, vec![1, 2]);
        assert!(validate_with(&OhlcvSeries::new("X", bars.clone()), true).has_errors());

        bars[3].timestamp = Day(0);
        let report = validate(&OhlcvSeries::new("X", bars));
        assert!(report.has_errors());
        assert_eq!(
            report
                .findings
                .iter()
                .find(|f| f.severity == Severity::Error)
                .unwrap()
                .index,
            3
        );
    }

    #[test]
    fn windows() {
        let s = OhlcvSeries::new("X", (0..500).map(|i| bar(i, i as f64 + 1.0)).collect());
        let w = window(&s, 299, 300).unwrap();
        assert_eq!(w.len(), 300);
        assert_eq!(w.bars()[0], s.bars()[0]);
        assert_eq!(w.bars()[299], s.bars()[299]);

        assert!(matches!(
            window(&s, 100, 300),
            Err(MarketDataError::InsufficientHistory { .. })
        ));
        let one = window(&s, 42, 1).unwrap();
        assert_eq!(one.bars(), &s.bars()[42..43]);
    }

    #[test]
    fn canonical_csv_round_trip() {
        let bars = vec![Bar {
            timestamp: Day(18628),
            open: 0.1 + 0.2,
            high: 1.0 / 3.0,
            low: 1e-9,
            close: 12345.678901234567,
            volume: 0.0,
        }];
        let s = OhlcvSeries::new("X", bars);
        let text = s.to_csv_string();
        let back = read_csv(text.as_bytes(), "X", &CsvSchema::default()).unwrap();
        assert_eq!(back, s);
    }
}
