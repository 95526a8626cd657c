use serde::{Deserialize, Serialize};

/// An ordered rule program; the first rule whose condition holds decides the bar.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleSet {
    pub name: String,
    pub description: String,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub condition: Expr,
    pub signal: i8,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Or(Vec<Expr>),
    And(Vec<Expr>),
    Not(Box<Expr>),
    Compare {
        lhs: Arith,
        op: CmpOp,
        rhs: Arith,
    },
    Cross {
        direction: CrossDirection,
        left: String,
        right: CrossOperand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossDirection {
    Above,
    Below,
}

impl CrossDirection {
    pub fn keyword(self) -> &'static str {
        match self {
            CrossDirection::Above => "cross_above",
            CrossDirection::Below => "cross_below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CrossOperand {
    Column(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Arith {
    Number(f64),
    Column(String),
    /// Column value `k` bars before the current one.
    Prev(String, u8),
    Binary {
        op: ArithOp,
        lhs: Box<Arith>,
        rhs: Box<Arith>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }
}

impl Expr {
    /// Calls `f` on every column name the expression reads.
    pub fn visit_columns(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Or(xs) | Expr::And(xs) => xs.iter().for_each(|x| x.visit_columns(f)),
            Expr::Not(x) => x.visit_columns(f),
            Expr::Compare { lhs, rhs, .. } => {
                lhs.visit_columns(f);
                rhs.visit_columns(f);
            }
            Expr::Cross { left, right, .. } => {
                f(left);
                if let CrossOperand::Column(c) = right {
                    f(c);
                }
            }
        }
    }
}

impl Arith {
    pub fn visit_columns(&self, f: &mut impl FnMut(&str)) {
        match self {
            Arith::Number(_) => {}
            Arith::Column(c) | Arith::Prev(c, _) => f(c),
            Arith::Binary { lhs, rhs, .. } => {
                lhs.visit_columns(f);
                rhs.visit_columns(f);
            }
        }
    }
}
