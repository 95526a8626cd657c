//! Recursive-descent parser for `.afs` rule programs.
//!
//! ```text
//! ruleset    := { rule }
//! rule       := "WHEN" expr "EMIT" "signal" "=" int "position" "=" number ";"
//! expr       := andexpr { "OR" andexpr }
//! andexpr    := notexpr { "AND" notexpr }
//! notexpr    := [ "NOT" ] primary
//! primary    := comparison | crossfn | "(" expr ")"
//! comparison := arith ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) arith
//! crossfn    := ( "cross_above" | "cross_below" ) "(" colref "," ( colref | number ) ")"
//! arith      := term { ("+" | "-") term }
//! term       := atom { ("*" | "/") atom }
//! atom       := number | colref | "prev" "(" colref [ "," int ] ")" | "(" arith ")"
//! ```
//!
//! A leading `(` is ambiguous between a grouped condition and a parenthesized
//! arithmetic operand; the parser tries the grouped condition first and
//! backtracks.

use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::DslError;
use crate::factors::{parse_factor_name, RAW_COLUMNS};

pub const MAX_PREV: u8 = 10;

const RESERVED: [&str; 10] = [
    "when",
    "emit",
    "and",
    "or",
    "not",
    "signal",
    "position",
    "prev",
    "cross_above",
    "cross_below",
];

pub fn parse(src: &str) -> Result<RuleSet, DslError> {
    let toks = tokenize(src).map_err(|e| DslError::Syntax {
        line: e.line,
        col: e.col,
        expected: vec!["a token".into()],
        found: format!("'{}'", e.found),
    })?;
    let mut p = Parser { toks, pos: 0 };
    let mut rules = Vec::new();
    while p.peek() != &Tok::Eof {
        let rule_index = rules.len();
        rules.push(p.rule(rule_index)?);
    }
    Ok(RuleSet {
        rules,
        ..RuleSet::default()
    })
}

/// Whether `name` is a raw OHLCV column or a catalog factor.
pub fn is_known_column(name: &str) -> bool {
    RAW_COLUMNS.contains(&name) || parse_factor_name(name).is_ok()
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> DslError {
        let at = self.here();
        DslError::Syntax {
            line: at.line,
            col: at.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: at.tok.to_string(),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&kw.to_ascii_uppercase()]))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), DslError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&tok.to_string()]))
        }
    }

    fn signed_number(&mut self) -> Result<f64, DslError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek() {
            Tok::Number(n) => {
                let n = *n;
                self.bump();
                Ok(if negative { -n } else { n })
            }
            _ => Err(self.error(&["number"])),
        }
    }

    fn rule(&mut self, index: usize) -> Result<Rule, DslError> {
        self.keyword("when")?;
        let condition = self.expr()?;
        self.keyword("emit")?;
        self.keyword("signal")?;
        self.expect(Tok::Assign)?;
        let at = self.here().clone();
        let signal = self.signed_number()?;
        if signal.fract() != 0.0 || ![-1.0, 0.0, 1.0].contains(&signal) {
            return Err(DslError::InvalidDecision {
                rule: index,
                line: at.line,
                message: format!("signal must be -1, 0 or 1, got {signal}"),
            });
        }
        self.keyword("position")?;
        self.expect(Tok::Assign)?;
        let at = self.here().clone();
        let position = self.signed_number()?;
        if !(0.0..=1.0).contains(&position) {
            return Err(DslError::InvalidDecision {
                rule: index,
                line: at.line,
                message: format!("position must be within [0, 1], got {position}"),
            });
        }
        self.expect(Tok::Semi)?;
        let signal = signal as i8;
        if (signal == 1 && position <= 0.0) || (signal == -1 && position != 0.0) {
            return Err(DslError::InconsistentSignalPosition { rule: index });
        }
        Ok(Rule {
            condition,
            signal,
            position,
        })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut terms = vec![self.and_expr()?];
        while self.at_keyword("or") {
            self.bump();
            terms.push(self.and_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Or(terms)
        })
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut terms = vec![self.not_expr()?];
        while self.at_keyword("and") {
            self.bump();
            terms.push(self.not_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::And(terms)
        })
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if self.at_keyword("not") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.primary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        if self.at_keyword("cross_above") || self.at_keyword("cross_below") {
            return self.cross();
        }
        if *self.peek() == Tok::LParen {
            let start = self.pos;
            self.bump();
            let grouped = self.expr().and_then(|e| {
                self.expect(Tok::RParen)?;
                Ok(e)
            });
            let first_err = match grouped {
                Ok(e) => return Ok(e),
                Err(e) => e,
            };
            self.pos = start;
            return self.comparison().map_err(|second| furthest(first_err, second));
        }
        self.comparison()
    }

    fn cross(&mut self) -> Result<Expr, DslError> {
        let direction = if self.at_keyword("cross_above") {
            CrossDirection::Above
        } else {
            CrossDirection::Below
        };
        self.bump();
        self.expect(Tok::LParen)?;
        let left = self.colref()?;
        self.expect(Tok::Comma)?;
        let right = match self.peek() {
            Tok::Number(_) | Tok::Minus => CrossOperand::Number(self.signed_number()?),
            Tok::Word(_) => CrossOperand::Column(self.colref()?),
            _ => return Err(self.error(&["column", "number"])),
        };
        self.expect(Tok::RParen)?;
        Ok(Expr::Cross { direction, left, right })
    }

    fn comparison(&mut self) -> Result<Expr, DslError> {
        let lhs = self.arith()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            _ => return Err(self.error(&["<", "<=", ">", ">=", "==", "!=", "+", "-", "*", "/"])),
        };
        self.bump();
        let rhs = self.arith()?;
        Ok(Expr::Compare { lhs, op, rhs })
    }

    fn arith(&mut self) -> Result<Arith, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Arith::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Arith, DslError> {
        let mut lhs = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let at = self.here().clone();
            let rhs = self.atom()?;
            if op == ArithOp::Div && rhs == Arith::Number(0.0) {
                return Err(DslError::DivisionByZero {
                    line: at.line,
                    col: at.col,
                });
            }
            lhs = Arith::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn atom(&mut self) -> Result<Arith, DslError> {
        match self.peek() {
            Tok::Number(_) | Tok::Minus => Ok(Arith::Number(self.signed_number()?)),
            Tok::LParen => {
                self.bump();
                let inner = self.arith()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Word(_) if self.at_keyword("prev") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let col = self.colref()?;
                let mut k = 1u8;
                if *self.peek() == Tok::Comma {
                    self.bump();
                    let at = self.here().clone();
                    let n = match self.peek() {
                        Tok::Number(n) => *n,
                        _ => return Err(self.error(&["integer"])),
                    };
                    if n.fract() != 0.0 || n < 1.0 || n > MAX_PREV as f64 {
                        return Err(DslError::PrevOutOfRange {
                            line: at.line,
                            col: at.col,
                        });
                    }
                    self.bump();
                    k = n as u8;
                }
                self.expect(Tok::RParen)?;
                Ok(Arith::Prev(col, k))
            }
            Tok::Word(_) => Ok(Arith::Column(self.colref()?)),
            _ => Err(self.error(&["number", "column", "prev", "("])),
        }
    }

    fn colref(&mut self) -> Result<String, DslError> {
        let at = self.here().clone();
        let name = match &at.tok {
            Tok::Word(w) => w.clone(),
            _ => return Err(self.error(&["column"])),
        };
        let well_formed = name.starts_with(|c: char| c.is_ascii_lowercase())
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !well_formed || RESERVED.iter().any(|r| r.eq_ignore_ascii_case(&name)) {
            return Err(self.error(&["column"]));
        }
        if !is_known_column(&name) {
            return Err(DslError::UnknownColumn {
                name,
                line: at.line,
                col: at.col,
            });
        }
        self.bump();
        Ok(name)
    }
}

fn furthest(a: DslError, b: DslError) -> DslError {
    if b.position() > a.position() {
        b
    } else {
        a
    }
}
