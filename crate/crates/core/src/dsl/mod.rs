//! Lagrangian expression language: parser, AST, evaluation over any
//! [`Scalar`](crate::jet::Scalar), and builtin Lagrangian families.

mod ast;
mod lagrangian;
mod parser;

pub use ast::{BinOp, Expr, Expression, Var, VarKind};
pub use lagrangian::{check_homogeneity, BuiltinFamily, HomogeneityReport, LagrangianSpec};
pub use parser::{parse, ParseError, ParseErrorKind};
