//! Pratt parser for the Lagrangian expression language.
//!
//! ```text
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := "-" unary | power
//! power    := atom ("^" exponent)*
//! exponent := ["-"] number | "(" ["-"] number ")"
//! atom     := number | "x"<int> | "y"<int> | "sqrt" "(" expr ")" | "(" expr ")"
//! number   := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
//! ```
//!
//! Binary operators of equal precedence associate to the left, including
//! `^` (`x^2^3` is `(x^2)^3`). Whitespace is ignored.

use thiserror::Error;

use super::ast::{BinOp, Expr, Expression, Var, VarKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected token {0}")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("variable index out of range: {name} with dimension {n}")]
    VariableIndexOutOfRange { name: String, n: usize },
    #[error("exponent must be a numeric literal")]
    NonLiteralExponent,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            d if d.is_ascii_digit() || d == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(s.to_string()),
                })?;
                out.push((start, Tok::Num(v)));
                continue;
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            other => {
                let ch = text[start..].chars().next().unwrap_or(other);
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    n: usize,
    _text: &'a str,
}

const BP_ADD: u8 = 1;
const BP_MUL: u8 = 3;
const BP_UNARY: u8 = 5;
const BP_POW: u8 = 7;

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(ParseErrorKind::UnexpectedToken(t.describe()))),
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, bp) = match self.peek() {
                Some(Tok::Plus) => (Some(BinOp::Add), BP_ADD),
                Some(Tok::Minus) => (Some(BinOp::Sub), BP_ADD),
                Some(Tok::Star) => (Some(BinOp::Mul), BP_MUL),
                Some(Tok::Slash) => (Some(BinOp::Div), BP_MUL),
                Some(Tok::Caret) => (None, BP_POW),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.pos += 1;
            lhs = match op {
                Some(op) => {
                    let rhs = self.expr(bp + 1)?;
                    Expr::Bin(op, Box::new(lhs), Box::new(rhs))
                }
                None => Expr::Pow(Box::new(lhs), self.exponent()?),
            };
        }
        Ok(lhs)
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        let paren = matches!(self.peek(), Some(Tok::LParen));
        if paren {
            self.pos += 1;
        }
        let neg = matches!(self.peek(), Some(Tok::Minus));
        if neg {
            self.pos += 1;
        }
        let v = match self.peek() {
            Some(Tok::Num(v)) => *v,
            None => return Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(_) => return Err(self.err(ParseErrorKind::NonLiteralExponent)),
        };
        self.pos += 1;
        if paren {
            match self.peek() {
                Some(Tok::RParen) => self.pos += 1,
                None => return Err(self.err(ParseErrorKind::UnexpectedEnd)),
                Some(_) => return Err(self.err(ParseErrorKind::NonLiteralExponent)),
            }
        }
        Ok(if neg { -v } else { v })
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.next() {
            None => Err(ParseError {
                offset: at,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Minus) => Ok(Expr::Neg(Box::new(self.expr(BP_UNARY)?))),
            Some(Tok::LParen) => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.identifier(name, at),
            Some(t) => Err(ParseError {
                offset: at,
                kind: ParseErrorKind::UnexpectedToken(t.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, at: usize) -> Result<Expr, ParseError> {
        if name == "sqrt" {
            self.expect(Tok::LParen)?;
            let e = self.expr(0)?;
            self.expect(Tok::RParen)?;
            return Ok(Expr::Sqrt(Box::new(e)));
        }
        let kind = match name.as_bytes().first() {
            Some(b'x') => VarKind::X,
            Some(b'y') => VarKind::Y,
            _ => {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                })
            }
        };
        let digits = &name[1..];
        let index: usize = match digits.parse() {
            Ok(i) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => i,
            _ => {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                })
            }
        };
        if index == 0 || index > self.n {
            return Err(ParseError {
                offset: at,
                kind: ParseErrorKind::VariableIndexOutOfRange { name, n: self.n },
            });
        }
        Ok(Expr::Var(Var { kind, index: index - 1 }))
    }
}

/// Parses `text` as an expression over `x1..xn, y1..yn`.
pub fn parse(text: &str, n: usize) -> Result<Expression, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        n,
        _text: text,
    };
    let root = p.expr(0)?;
    if let Some(t) = p.peek() {
        return Err(p.err(ParseErrorKind::UnexpectedToken(t.describe())));
    }
    Ok(Expression::from_expr(root, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetContext;

    fn eval(text: &str, n: usize, point: &[f64]) -> f64 {
        parse(text, n).unwrap().evaluate(point).unwrap()
    }

    #[test]
    fn euclidean_value() {
        assert_eq!(eval("0.5*(y1^2 + y2^2)", 2, &[0.0, 0.0, 3.0, 4.0]), 12.5);
    }

    #[test]
    fn randers_type_value() {
        let v = eval("0.5*(sqrt(y1^2+y2^2) + 0.3*y1)^2", 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!((v - 0.845).abs() < 1e-15);
    }

    #[test]
    fn index_out_of_range() {
        let e = parse("y3", 2).unwrap_err();
        assert_eq!(e.offset, 0);
        assert!(e.to_string().contains("variable index out of range"));
        assert!(matches!(
            parse("x0 + 1", 2).unwrap_err().kind,
            ParseErrorKind::VariableIndexOutOfRange { .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let e = parse("y1 + * y2", 2).unwrap_err();
        assert_eq!(e.offset, 5);
        let e = parse("y1 + foo", 2).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("foo".into()));
        assert_eq!(e.offset, 5);
        assert_eq!(parse("   ", 2).unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse("(y1", 2).unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("y1^y2", 2).unwrap_err().kind, ParseErrorKind::NonLiteralExponent);
        assert!(matches!(
            parse("y1 # 2", 2).unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('#')
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        // pow binds tighter than unary minus
        assert_eq!(eval("-y1^2", 1, &[0.0, 3.0]), -9.0);
        assert_eq!(eval("8 - 3 - 2", 1, &[0.0, 1.0]), 3.0);
        assert_eq!(eval("8 / 4 / 2", 1, &[0.0, 1.0]), 1.0);
        assert_eq!(eval("2 + 3 * 4", 1, &[0.0, 1.0]), 14.0);
        assert_eq!(eval("y1^2^3", 1, &[0.0, 2.0]), 64.0);
        assert_eq!(eval("y1^-1", 1, &[0.0, 4.0]), 0.25);
        assert_eq!(eval("y1^(-2)", 1, &[0.0, 2.0]), 0.25);
        assert_eq!(eval("2*-y1", 1, &[0.0, 2.0]), -4.0);
        assert_eq!(eval("1.5e1 + 2E-1", 1, &[0.0, 1.0]), 15.2);
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse("0.5*(y1^2+y2^2)", 2).unwrap();
        let b = parse(" 0.5 *\t( y1 ^ 2 + y2^2 ) ", 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jet_evaluation_gives_hessian() {
        let e = parse("0.5*(y1^2 + y2^2)", 2).unwrap();
        let ctx = JetContext::new(vec![0.0, 0.0, 3.0, 4.0], 2).unwrap();
        let l = e.evaluate(&ctx.seed_all()).unwrap();
        assert_eq!(l.value(), 12.5);
        let m = crate::jet::MultiIndex(vec![0, 0, 2, 0]);
        assert_eq!(l.derivative(&m).unwrap(), 1.0);
    }
}
