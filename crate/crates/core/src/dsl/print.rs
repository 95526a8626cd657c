//! Canonical text form. Printing then parsing yields a structurally equal AST.

use std::fmt;

use super::ast::*;

fn number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    write!(f, "{x:?}")
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.description.lines() {
            writeln!(f, "# {line}")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WHEN {} EMIT signal={} position=", self.condition, self.signal)?;
        number(f, self.position)?;
        f.write_str(";")
    }
}

fn joined(f: &mut fmt::Formatter<'_>, xs: &[Expr], sep: &str) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, " {sep} ")?;
        }
        match x {
            Expr::Or(_) | Expr::And(_) => write!(f, "({x})")?,
            _ => write!(f, "{x}")?,
        }
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Or(xs) => joined(f, xs, "OR"),
            Expr::And(xs) => joined(f, xs, "AND"),
            Expr::Not(x) => match x.as_ref() {
                Expr::Or(_) | Expr::And(_) | Expr::Not(_) => write!(f, "NOT ({x})"),
                _ => write!(f, "NOT {x}"),
            },
            Expr::Compare { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Expr::Cross { direction, left, right } => {
                write!(f, "{}({left}, ", direction.keyword())?;
                match right {
                    CrossOperand::Column(c) => f.write_str(c)?,
                    CrossOperand::Number(x) => number(f, *x)?,
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arith::Number(x) => number(f, *x),
            Arith::Column(c) => f.write_str(c),
            Arith::Prev(c, 1) => write!(f, "prev({c})"),
            Arith::Prev(c, k) => write!(f, "prev({c}, {k})"),
            Arith::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}
