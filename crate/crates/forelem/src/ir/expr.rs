//! The (closed) expression language of loop bodies and guards.

use std::fmt;

use super::schema::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `|lhs - rhs| > epsilon`, with epsilon taken from the program. At
    /// epsilon 0 this is exact float inequality.
    DeltaExceeds,
}

/// Pure expression over tuple fields, loop binders, and shared-space reads.
///
/// Arithmetic is scalar or elementwise vector (vector op scalar broadcasts);
/// `Dist` is the Euclidean distance between two equal-dimension vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Tuple field, localized field, or enclosing loop binder, by name.
    Field(String),
    Read { space: String, keys: Vec<Expr> },
    Const(Value),
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Cmp { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr> },
    And(Vec<Expr>),
    Dist(Box<Expr>, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn field(name: impl Into<String>) -> Expr {
        Expr::Field(name.into())
    }

    pub fn read(space: impl Into<String>, keys: Vec<Expr>) -> Expr {
        Expr::Read { space: space.into(), keys }
    }

    pub fn index(v: u64) -> Expr {
        Expr::Const(Value::Index(v))
    }

    pub fn scalar(v: f64) -> Expr {
        Expr::Const(Value::Scalar(v))
    }

    pub fn arith(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Arith { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        Expr::arith(ArithOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::arith(ArithOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        Expr::arith(ArithOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        Expr::arith(ArithOp::Div, lhs, rhs)
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn dist(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Dist(Box::new(lhs), Box::new(rhs))
    }

    /// Walks the tree, visiting every subexpression.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Field(_) | Expr::Const(_) => {}
            Expr::Read { keys, .. } => keys.iter().for_each(|k| k.visit(f)),
            Expr::Arith { lhs, rhs, .. } | Expr::Cmp { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            Expr::And(terms) => terms.iter().for_each(|t| t.visit(f)),
            Expr::Dist(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Rewrites every subexpression bottom-up.
    pub fn map(&self, f: &impl Fn(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Field(_) | Expr::Const(_) => self.clone(),
            Expr::Read { space, keys } => Expr::Read {
                space: space.clone(),
                keys: keys.iter().map(|k| k.map(f)).collect(),
            },
            Expr::Arith { op, lhs, rhs } => Expr::arith(*op, lhs.map(f), rhs.map(f)),
            Expr::Cmp { op, lhs, rhs } => Expr::cmp(*op, lhs.map(f), rhs.map(f)),
            Expr::And(terms) => Expr::And(terms.iter().map(|t| t.map(f)).collect()),
            Expr::Dist(a, b) => Expr::dist(a.map(f), b.map(f)),
        };
        f(rebuilt)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Field(n) => write!(f, "{n}"),
            Expr::Read { space, keys } => {
                write!(f, "{space}[")?;
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, "]")
            }
            Expr::Const(Value::Index(v)) => write!(f, "{v}"),
            Expr::Const(Value::Scalar(v)) => write!(f, "{v}"),
            Expr::Const(Value::Vector(v)) => write!(f, "{v:?}"),
            Expr::Arith { op, lhs, rhs } => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                write!(f, "({lhs} {sym} {rhs})")
            }
            Expr::Cmp { op, lhs, rhs } => {
                let sym = match op {
                    CmpOp::Eq => "==",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                    CmpOp::DeltaExceeds => "!~",
                };
                write!(f, "({lhs} {sym} {rhs})")
            }
            Expr::And(terms) => {
                write!(f, "(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Expr::Dist(a, b) => write!(f, "dist({a},{b})"),
        }
    }
}
