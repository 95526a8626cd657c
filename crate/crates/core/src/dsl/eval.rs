//! Bar-by-bar evaluation of a rule program against a factor frame.
//!
//! A comparison touching `NaN` is false and marks its result as tainted.
//! Taint propagates through AND/OR, and NOT of a tainted operand stays false,
//! so missing data can never switch a rule on.

use super::ast::*;
use super::EvalError;
use crate::backtest::Decision;
use crate::factors::FactorFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Truth {
    value: bool,
    tainted: bool,
}

impl Truth {
    const TAINTED: Truth = Truth {
        value: false,
        tainted: true,
    };
}

struct Ctx<'a> {
    frame: &'a FactorFrame,
    index: usize,
}

impl Ctx<'_> {
    fn column(&self, name: &str) -> Result<&[f64], EvalError> {
        self.frame
            .column(name)
            .ok_or_else(|| EvalError::MissingColumn(name.to_string()))
    }

    fn at(&self, name: &str, back: usize) -> Result<f64, EvalError> {
        let col = self.column(name)?;
        Ok(if back > self.index {
            f64::NAN
        } else {
            col[self.index - back]
        })
    }

    fn arith(&self, a: &Arith) -> Result<f64, EvalError> {
        Ok(match a {
            Arith::Number(x) => *x,
            Arith::Column(c) => self.at(c, 0)?,
            Arith::Prev(c, k) => self.at(c, *k as usize)?,
            Arith::Binary { op, lhs, rhs } => {
                let l = self.arith(lhs)?;
                let r = self.arith(rhs)?;
                match op {
                    ArithOp::Add => l + r,
                    ArithOp::Sub => l - r,
                    ArithOp::Mul => l * r,
                    ArithOp::Div if r == 0.0 => f64::NAN,
                    ArithOp::Div => l / r,
                }
            }
        })
    }

    fn compare(&self, a: f64, op: CmpOp, b: f64) -> Truth {
        if a.is_nan() || b.is_nan() {
            Truth::TAINTED
        } else {
            Truth {
                value: op.apply(a, b),
                tainted: false,
            }
        }
    }

    fn truth(&self, e: &Expr) -> Result<Truth, EvalError> {
        Ok(match e {
            Expr::Or(xs) => {
                let mut out = Truth {
                    value: false,
                    tainted: false,
                };
                for x in xs {
                    let t = self.truth(x)?;
                    out.value |= t.value;
                    out.tainted |= t.tainted;
                }
                out
            }
            Expr::And(xs) => {
                let mut out = Truth {
                    value: true,
                    tainted: false,
                };
                for x in xs {
                    let t = self.truth(x)?;
                    out.value &= t.value;
                    out.tainted |= t.tainted;
                }
                out
            }
            Expr::Not(x) => {
                let t = self.truth(x)?;
                if t.tainted {
                    Truth::TAINTED
                } else {
                    Truth {
                        value: !t.value,
                        tainted: false,
                    }
                }
            }
            Expr::Compare { lhs, op, rhs } => self.compare(self.arith(lhs)?, *op, self.arith(rhs)?),
            Expr::Cross { direction, left, right } => {
                let (a_now, a_prev) = (self.at(left, 0)?, self.at(left, 1)?);
                let (b_now, b_prev) = match right {
                    CrossOperand::Column(c) => (self.at(c, 0)?, self.at(c, 1)?),
                    CrossOperand::Number(x) => (*x, *x),
                };
                let (was, now) = match direction {
                    CrossDirection::Above => (CmpOp::Le, CmpOp::Gt),
                    CrossDirection::Below => (CmpOp::Ge, CmpOp::Lt),
                };
                let before = self.compare(a_prev, was, b_prev);
                let after = self.compare(a_now, now, b_now);
                Truth {
                    value: before.value && after.value,
                    tainted: before.tainted || after.tainted,
                }
            }
        })
    }
}

/// Decision at bar `index`: the first rule whose condition holds, else hold with no position.
pub fn evaluate(rules: &RuleSet, frame: &FactorFrame, index: usize) -> Result<Decision, EvalError> {
    if index >= frame.len() {
        return Err(EvalError::IndexOutOfRange {
            index,
            len: frame.len(),
        });
    }
    let ctx = Ctx { frame, index };
    for rule in &rules.rules {
        if ctx.truth(&rule.condition)?.value {
            return Ok(Decision {
                signal: rule.signal,
                position: rule.position,
            });
        }
    }
    Ok(Decision::HOLD)
}

/// Index of the rule that fires at `index`, if any.
pub fn matching_rule(rules: &RuleSet, frame: &FactorFrame, index: usize) -> Result<Option<usize>, EvalError> {
    if index >= frame.len() {
        return Err(EvalError::IndexOutOfRange {
            index,
            len: frame.len(),
        });
    }
    let ctx = Ctx { frame, index };
    for (i, rule) in rules.rules.iter().enumerate() {
        if ctx.truth(&rule.condition)?.value {
            return Ok(Some(i));
        }
    }
    Ok(None)
}
