use std::collections::HashMap;

use super::rolling::Inputs;
use super::{parse_factor_name, FactorError, FactorSpec};
use crate::marketdata::OhlcvSeries;

pub const RAW_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];

/// A series together with named, bar-aligned factor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFrame {
    series: OhlcvSeries,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl FactorFrame {
    pub fn series(&self) -> &OhlcvSeries {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Raw columns first, then factors in request order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn factor_names(&self) -> &[String] {
        &self.names[RAW_COLUMNS.len()..]
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.columns[i].as_slice())
    }

    pub fn value(&self, name: &str, index: usize) -> Option<f64> {
        self.column(name).and_then(|c| c.get(index).copied())
    }

    /// All column values at one bar, in [`names`](Self::names) order.
    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }
}

/// Builds a frame with the raw OHLCV columns plus one column per distinct name.
pub fn compute_frame<S: AsRef<str>>(series: &OhlcvSeries, names: &[S]) -> Result<FactorFrame, FactorError> {
    let mut specs: Vec<(String, FactorSpec)> = Vec::new();
    for name in names {
        let name = name.as_ref();
        if RAW_COLUMNS.contains(&name) || specs.iter().any(|(n, _)| n == name) {
            continue;
        }
        specs.push((name.to_string(), parse_factor_name(name)?));
    }

    let inputs = Inputs::new(series);
    let mut out_names: Vec<String> = RAW_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut columns = vec![
        inputs.open.clone(),
        inputs.high.clone(),
        inputs.low.clone(),
        inputs.close.clone(),
        inputs.volume.clone(),
    ];
    for (name, spec) in specs {
        columns.push(spec.compute_from(&inputs));
        out_names.push(name);
    }
    let index = out_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    Ok(FactorFrame {
        series: series.clone(),
        names: out_names,
        columns,
        index,
    })
}
