//! Rule DSL for strategies.
//!
//! A program is an ordered list of `WHEN <condition> EMIT signal=<s> position=<p>;`
//! rules. At every bar the first rule whose condition holds decides; if none
//! does the strategy holds with no position. Priority overrides and tiered
//! sizing are both written as rule order:
//!
//! ```text
//! # full position when deeply oversold, half when mildly oversold
//! WHEN rsi_14 < 20 EMIT signal=1 position=1.0;
//! WHEN rsi_14 < 30 EMIT signal=1 position=0.5;
//! WHEN cross_below(ema_20, ema_50) OR rsi_14 > 70 EMIT signal=-1 position=0.0;
//! ```

pub mod ast;
mod eval;
mod lexer;
mod parser;
mod print;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use ast::{Arith, ArithOp, CmpOp, CrossDirection, CrossOperand, Expr, Rule, RuleSet};
pub use eval::{evaluate, matching_rule};
pub use parser::{is_known_column, parse, MAX_PREV};

use crate::factors::RAW_COLUMNS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{line}:{col}: unknown column '{name}'")]
    UnknownColumn { name: String, line: usize, col: usize },
    #[error("rule {rule}: signal and position disagree (buy needs position > 0, sell needs position 0)")]
    InconsistentSignalPosition { rule: usize },
    #[error("rule {rule} (line {line}): {message}")]
    InvalidDecision { rule: usize, line: usize, message: String },
    #[error("{line}:{col}: division by literal zero")]
    DivisionByZero { line: usize, col: usize },
    #[error("{line}:{col}: prev offset must be an integer in 1..={}", MAX_PREV)]
    PrevOutOfRange { line: usize, col: usize },
    #[error("cannot read strategy file: {0}")]
    Io(String),
}

impl DslError {
    pub(crate) fn position(&self) -> (usize, usize) {
        match self {
            DslError::Syntax { line, col, .. }
            | DslError::UnknownColumn { line, col, .. }
            | DslError::DivisionByZero { line, col }
            | DslError::PrevOutOfRange { line, col } => (*line, *col),
            DslError::InvalidDecision { line, .. } => (*line, 0),
            DslError::InconsistentSignalPosition { .. } | DslError::Io(_) => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("bar index {index} out of range for frame of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("column '{0}' is not in the frame")]
    MissingColumn(String),
}

impl RuleSet {
    /// Sorted, deduplicated factor columns the rules read (raw OHLCV excluded).
    pub fn required_factors(&self) -> Vec<String> {
        let mut names = Vec::new();
        for rule in &self.rules {
            rule.condition.visit_columns(&mut |c| {
                if !RAW_COLUMNS.contains(&c) {
                    names.push(c.to_string());
                }
            });
        }
        names.sort();
        names.dedup();
        names
    }
}

pub fn required_factors(rules: &RuleSet) -> Vec<String> {
    rules.required_factors()
}

/// Parses an `.afs` file. The file stem becomes the rule set name and the
/// leading comment block its description.
pub fn load_afs(path: impl AsRef<Path>) -> Result<RuleSet, DslError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DslError::Io(format!("{}: {e}", path.display())))?;
    let mut rules = parse(&text)?;
    rules.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    rules.description = text
        .lines()
        .map(str::trim)
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::Decision;
    use crate::factors::compute_frame;
    use crate::marketdata::{Bar, Day, OhlcvSeries};

    fn frame_with_closes(closes: &[f64], names: &[&str]) -> crate::factors::FactorFrame {
        let s = OhlcvSeries::new(
            "T",
            closes
                .iter()
                .enumerate()
                .map(|(i, &c)| Bar {
                    timestamp: Day(i as i64),
                    open: c,
                    high: c + 1.0,
                    low: c - 1.0,
                    close: c,
                    volume: 100.0,
                })
                .collect(),
        );
        compute_frame(&s, names).unwrap()
    }

    #[test]
    fn parses_threshold_and_crossover() {
        let rs = parse("WHEN rsi_14 < 30 EMIT signal=1 position=1.0;").unwrap();
        assert_eq!(rs.rules.len(), 1);
        assert_eq!(rs.rules[0].signal, 1);
        assert!(matches!(rs.rules[0].condition, Expr::Compare { op: CmpOp::Lt, .. }));

        let rs = parse("WHEN cross_above(ema_20, ema_50) EMIT signal=1 position=0.5;").unwrap();
        assert_eq!(
            rs.rules[0].condition,
            Expr::Cross {
                direction: CrossDirection::Above,
                left: "ema_20".into(),
                right: CrossOperand::Column("ema_50".into())
            }
        );
    }

    #[test]
    fn rejects_inconsistent_decision() {
        assert_eq!(
            parse("WHEN rsi_14 < 30 EMIT signal=1 position=0.0;"),
            Err(DslError::InconsistentSignalPosition { rule: 0 })
        );
        assert_eq!(
            parse("WHEN close > 1 EMIT signal=0 position=0;\nWHEN rsi_14 > 70 EMIT signal=-1 position=0.5;"),
            Err(DslError::InconsistentSignalPosition { rule: 1 })
        );
        assert!(matches!(
            parse("WHEN close > 1 EMIT signal=2 position=1;"),
            Err(DslError::InvalidDecision { .. })
        ));
        assert!(matches!(
            parse("WHEN close > 1 EMIT signal=1 position=1.5;"),
            Err(DslError::InvalidDecision { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("WHEN rsi_14 < 30\nEMIT signal=1 position=1.0").unwrap_err();
        match err {
            DslError::Syntax { line, expected, .. } => {
                assert_eq!(line, 2);
                assert_eq!(expected, vec!["';'"]);
            }
            other => panic!("{other:?}"),
        }
        let err = parse("WHEN rsi_14 30 EMIT signal=1 position=1.0;").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 1, col: 13, .. }), "{err:?}");
        assert!(matches!(
            parse("WHEN foo_9 < 1 EMIT signal=0 position=0;"),
            Err(DslError::UnknownColumn { name, .. }) if name == "foo_9"
        ));
        assert!(matches!(
            parse("WHEN close / 0 > 1 EMIT signal=0 position=0;"),
            Err(DslError::DivisionByZero { .. })
        ));
        assert!(matches!(
            parse("WHEN prev(close, 11) > 1 EMIT signal=0 position=0;"),
            Err(DslError::PrevOutOfRange { .. })
        ));
    }

    #[test]
    fn keywords_case_insensitive_columns_not() {
        assert!(parse("when close > 1 emit SIGNAL=0 Position=0;").is_ok());
        assert!(parse("WHEN Close > 1 EMIT signal=0 position=0;").is_err());
    }

    #[test]
    fn grouping_and_parenthesized_arith() {
        let rs = parse("WHEN (rsi_14 < 30 OR (close + 1) * 2 > sma_5) AND NOT (macd < 0) EMIT signal=1 position=1;")
            .unwrap();
        let Expr::And(parts) = &rs.rules[0].condition else {
            panic!()
        };
        assert!(matches!(parts[0], Expr::Or(_)));
        assert!(matches!(parts[1], Expr::Not(_)));
    }

    #[test]
    fn printed_form_reparses() {
        let src = "WHEN (rsi_14 < 30 OR (close + 1) * 2 > sma_5) AND NOT (macd < -0.5) EMIT signal=1 position=1;\n\
                   WHEN cross_below(macd, macd_signal) OR prev(close, 3) / close >= 1.05 EMIT signal=-1 position=0;\n\
                   WHEN NOT (NOT close > 1e-7 AND volume != 0) EMIT signal=0 position=0.25;";
        let a = parse(src).unwrap();
        let b = parse(&a.to_string()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn required_factor_lists() {
        let rs = parse(
            "WHEN rsi_14 < 30 AND close > 1 EMIT signal=1 position=1;\nWHEN rsi_14 > 70 EMIT signal=-1 position=0;",
        )
        .unwrap();
        assert_eq!(rs.required_factors(), vec!["rsi_14"]);
        assert!(RuleSet::default().required_factors().is_empty());
        let rs = parse("WHEN ema_20 > ema_50 AND macd > 0 EMIT signal=1 position=1;").unwrap();
        assert_eq!(rs.required_factors(), vec!["ema_20", "ema_50", "macd"]);
    }

    #[test]
    fn nan_falls_through_to_default() {
        let f = frame_with_closes(&[10.0, 11.0, 12.0], &["rsi_14"]);
        let rs = parse("WHEN rsi_14 < 30 EMIT signal=1 position=1.0;").unwrap();
        assert_eq!(evaluate(&rs, &f, 2).unwrap(), Decision::HOLD);
        let rs = parse("WHEN NOT rsi_14 < 30 EMIT signal=1 position=1.0;").unwrap();
        assert_eq!(evaluate(&rs, &f, 2).unwrap(), Decision::HOLD);
    }

    #[test]
    fn first_match_wins_and_tiers() {
        let f = frame_with_closes(&[10.0, 11.0, 12.0], &[]);
        let rs =
            parse("WHEN close > 5 EMIT signal=1 position=0.3;\nWHEN close > 1 EMIT signal=1 position=0.9;").unwrap();
        assert_eq!(
            evaluate(&rs, &f, 0).unwrap(),
            Decision {
                signal: 1,
                position: 0.3
            }
        );

        // rsi = 25 picks the second tier; emulate with close standing in for rsi
        let f = frame_with_closes(&[25.0], &[]);
        let rs =
            parse("WHEN close < 20 EMIT signal=1 position=1.0;\nWHEN close < 30 EMIT signal=1 position=0.5;").unwrap();
        assert_eq!(
            evaluate(&rs, &f, 0).unwrap(),
            Decision {
                signal: 1,
                position: 0.5
            }
        );
        assert_eq!(matching_rule(&rs, &f, 0).unwrap(), Some(1));
    }

    #[test]
    fn crossover_semantics() {
        let f = frame_with_closes(&[9.0, 10.0, 11.0, 10.0], &[]);
        let rs = parse("WHEN cross_above(close, 10) EMIT signal=1 position=1;").unwrap();
        let fired: Vec<bool> = (0..4).map(|t| evaluate(&rs, &f, t).unwrap().signal == 1).collect();
        // prev <= 10 and now > 10 only at bar 2; bar 0 has no previous value
        assert_eq!(fired, vec![false, false, true, false]);
    }

    #[test]
    fn eval_errors() {
        let f = frame_with_closes(&[1.0], &[]);
        let rs = parse("WHEN rsi_14 < 30 EMIT signal=1 position=1.0;").unwrap();
        assert_eq!(evaluate(&rs, &f, 0), Err(EvalError::MissingColumn("rsi_14".into())));
        assert!(matches!(evaluate(&rs, &f, 5), Err(EvalError::IndexOutOfRange { .. })));
    }
}
