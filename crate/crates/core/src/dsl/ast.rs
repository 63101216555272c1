use std::fmt;

use serde::{Deserialize, Serialize};

use crate::jet::{JetError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    X,
    Y,
}

/// Coordinate reference; `index` is zero-based (`y1` has index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    /// Slot in the `(x, y)` assignment of a dimension-`n` problem.
    pub fn slot(&self, n: usize) -> usize {
        match self.kind {
            VarKind::X => self.index,
            VarKind::Y => n + self.index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Power with a literal exponent.
    Pow(Box<Expr>, f64),
    Sqrt(Box<Expr>),
}

/// Integer exponents up to this magnitude go through repeated
/// multiplication instead of `powf`, so they also work on negative bases.
const MAX_INTEGER_EXPONENT: f64 = 64.0;

impl Expr {
    pub fn eval<S: Scalar>(&self, n: usize, vars: &[S]) -> Result<S, JetError> {
        Ok(match self {
            Expr::Num(c) => vars[0].lift(*c),
            Expr::Var(v) => vars[v.slot(n)].clone(),
            Expr::Neg(e) => -e.eval(n, vars)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(n, vars)?;
                let b = r.eval(n, vars)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.try_div(&b)?,
                }
            }
            Expr::Pow(base, p) => {
                let b = base.eval(n, vars)?;
                if p.fract() == 0.0 && p.abs() <= MAX_INTEGER_EXPONENT {
                    b.try_powi(*p as i32)?
                } else {
                    b.try_powf(*p)?
                }
            }
            Expr::Sqrt(e) => e.eval(n, vars)?.try_sqrt()?,
        })
    }

    /// Visits every variable reference.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Sqrt(e) => e.for_each_var(f),
            Expr::Bin(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var(v) => match v.kind {
                VarKind::X => write!(f, "x{}", v.index + 1),
                VarKind::Y => write!(f, "y{}", v.index + 1),
            },
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Pow(b, p) => write!(f, "({b})^({p:?})"),
            Expr::Sqrt(e) => write!(f, "sqrt({e})"),
        }
    }
}

/// Parsed expression over `x1..xn, y1..yn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expression {
    pub(crate) root: Expr,
    pub(crate) n: usize,
}

impl Expression {
    pub fn from_expr(root: Expr, n: usize) -> Self {
        Expression { root, n }
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Expression { root: Expr::Num(c), n }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Evaluates under an assignment of `2n` scalars (`x` first, then `y`).
    pub fn evaluate<S: Scalar>(&self, assignment: &[S]) -> Result<S, JetError> {
        if assignment.len() != 2 * self.n {
            return Err(JetError::DimensionMismatch {
                expected: 2 * self.n,
                got: assignment.len(),
            });
        }
        self.root.eval(self.n, assignment)
    }

    pub fn depends_on_y(&self) -> bool {
        let mut found = false;
        self.root.for_each_var(&mut |v| found |= v.kind == VarKind::Y);
        found
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
