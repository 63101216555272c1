use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, Expression, Var, VarKind};
use super::parser::parse;
use crate::error::{Error, Result};
use crate::geometry::BasePoint;
use crate::jet::{JetContext, JetError, MultiIndex, Scalar};

/// A Finsler Lagrangian on the slit tangent bundle of an `n`-manifold chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianSpec {
    pub n: usize,
    pub expr: Expression,
    /// Must be strictly positive at accepted sample points.
    pub guard: Option<Expression>,
    pub label: String,
}

impl LagrangianSpec {
    pub fn new(n: usize, expr: Expression, label: impl Into<String>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if expr.dimension() != n {
            return Err(Error::InvalidInput(format!(
                "expression parsed for dimension {} used with dimension {n}",
                expr.dimension()
            )));
        }
        Ok(LagrangianSpec {
            n,
            expr,
            guard: None,
            label: label.into(),
        })
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Self::new(n, parse(text, n)?, text)
    }

    pub fn with_guard(mut self, guard: Expression) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn evaluate<S: Scalar>(&self, assignment: &[S]) -> std::result::Result<S, JetError> {
        self.expr.evaluate(assignment)
    }

    /// Whether the guard (if any) is positive at the point.
    pub fn guard_holds(&self, p: &BasePoint) -> bool {
        match &self.guard {
            None => true,
            Some(g) => g.evaluate(&p.coords()).is_ok_and(|v| v > 0.0),
        }
    }
}

/// Standard example families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BuiltinFamily {
    Euclidean {
        n: usize,
    },
    /// `½ yᵀ a(x) y` with `a` symmetric, entries depending on `x` only.
    Riemannian {
        a: Vec<Vec<Expression>>,
    },
    /// `½ (sqrt(yᵀ a y) + b·y)²`, with `a` and `b` depending on `x` only.
    Randers {
        a: Vec<Vec<Expression>>,
        b: Vec<Expression>,
    },
    /// `½ sqrt(|y|⁴ + Σ cᵢ (yⁱ)⁴)`.
    QuarticMinkowski {
        coefficients: Vec<f64>,
    },
}

fn var(kind: VarKind, index: usize) -> Expr {
    Expr::Var(Var { kind, index })
}

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::Bin(op, Box::new(l), Box::new(r))
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|a, b| bin(BinOp::Add, a, b))
        .unwrap_or(Expr::Num(0.0))
}

fn check_x_only(e: &Expression, what: &str) -> Result<()> {
    if e.depends_on_y() {
        return Err(Error::InvalidInput(format!("{what} must depend on x only")));
    }
    Ok(())
}

fn check_matrix(a: &[Vec<Expression>]) -> Result<usize> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
    }
    for i in 0..n {
        for j in 0..n {
            check_x_only(&a[i][j], "matrix entry")?;
            if a[i][j].dimension() != n {
                return Err(Error::InvalidInput("matrix entry has wrong dimension".into()));
            }
            if a[i][j] != a[j][i] {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric: entry ({i},{j}) differs from ({j},{i})"
                )));
            }
        }
    }
    Ok(n)
}

/// `yᵀ a y` as an expression tree.
fn quadratic_form(a: &[Vec<Expression>]) -> Expr {
    let n = a.len();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if a[i][j].root == Expr::Num(0.0) {
                continue;
            }
            terms.push(bin(
                BinOp::Mul,
                a[i][j].root.clone(),
                bin(BinOp::Mul, var(VarKind::Y, i), var(VarKind::Y, j)),
            ));
        }
    }
    sum(terms)
}

impl BuiltinFamily {
    pub fn euclidean(n: usize) -> Self {
        BuiltinFamily::Euclidean { n }
    }

    /// Riemannian family from matrix entries written in the expression DSL.
    pub fn riemannian(entries: &[Vec<&str>]) -> Result<Self> {
        let n = entries.len();
        let a = entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse(t, n))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        check_matrix(&a)?;
        Ok(BuiltinFamily::Riemannian { a })
    }

    pub fn randers(a_entries: &[Vec<&str>], b_entries: &[&str]) -> Result<Self> {
        let n = a_entries.len();
        let a = a_entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse(t, n))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let b = b_entries
            .iter()
            .map(|t| parse(t, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(BuiltinFamily::Randers { a, b })
    }

    /// Randers with Euclidean `a` and constant `b = (beta, 0, …)`.
    pub fn randers_constant(n: usize, beta: f64) -> Self {
        let a = identity_entries(n);
        let b = (0..n)
            .map(|i| Expression::constant(if i == 0 { beta } else { 0.0 }, n))
            .collect();
        BuiltinFamily::Randers { a, b }
    }

    /// Randers with Euclidean `a` and the rotational one-form
    /// `b = beta·(−x2, x1, 0, …)`. It is not parallel, so the resulting space
    /// is neither Berwald nor Landsberg. Needs `n ≥ 2`.
    pub fn randers_rotational(n: usize, beta: f64) -> Self {
        assert!(n >= 2, "rotational Randers needs n >= 2");
        let a = identity_entries(n);
        let mut b: Vec<Expression> = (0..n).map(|_| Expression::constant(0.0, n)).collect();
        b[0] = Expression::from_expr(bin(BinOp::Mul, Expr::Num(-beta), var(VarKind::X, 1)), n);
        b[1] = Expression::from_expr(bin(BinOp::Mul, Expr::Num(beta), var(VarKind::X, 0)), n);
        BuiltinFamily::Randers { a, b }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BuiltinFamily::Euclidean { n } => *n,
            BuiltinFamily::Riemannian { a } | BuiltinFamily::Randers { a, .. } => a.len(),
            BuiltinFamily::QuarticMinkowski { coefficients } => coefficients.len(),
        }
    }

    pub fn build(&self) -> Result<LagrangianSpec> {
        match self {
            BuiltinFamily::Euclidean { n } => {
                let n = *n;
                let a = identity_entries(n);
                let root = bin(BinOp::Mul, Expr::Num(0.5), quadratic_form(&a));
                LagrangianSpec::new(n, Expression::from_expr(root, n), format!("euclidean(n={n})"))
            }
            BuiltinFamily::Riemannian { a } => {
                let n = check_matrix(a)?;
                let root = bin(BinOp::Mul, Expr::Num(0.5), quadratic_form(a));
                LagrangianSpec::new(n, Expression::from_expr(root, n), format!("riemannian(n={n})"))
            }
            BuiltinFamily::Randers { a, b } => {
                let n = check_matrix(a)?;
                if b.len() != n {
                    return Err(Error::InvalidInput("b must have n entries".into()));
                }
                for bi in b {
                    check_x_only(bi, "b entry")?;
                }
                let origin = vec![0.0; 2 * n];
                let all_const = a.iter().flatten().chain(b).all(|e| {
                    let mut uses = false;
                    e.root.for_each_var(&mut |_| uses = true);
                    !uses
                });
                if all_const {
                    let av: Vec<f64> = a
                        .iter()
                        .flatten()
                        .map(|e| e.evaluate(&origin))
                        .collect::<std::result::Result<_, _>>()?;
                    let bv: Vec<f64> = b
                        .iter()
                        .map(|e| e.evaluate(&origin))
                        .collect::<std::result::Result<_, _>>()?;
                    let (ainv, _) = crate::jet::invert_matrix(&av, n)?;
                    let mut norm2 = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            norm2 += bv[i] * ainv[i * n + j] * bv[j];
                        }
                    }
                    if norm2 >= 1.0 {
                        return Err(Error::InvalidInput(format!(
                            "Randers one-form has a-norm {} >= 1",
                            norm2.sqrt()
                        )));
                    }
                }
                let beta = sum((0..n)
                    .filter(|&i| b[i].root != Expr::Num(0.0))
                    .map(|i| bin(BinOp::Mul, b[i].root.clone(), var(VarKind::Y, i)))
                    .collect());
                let f = bin(BinOp::Add, Expr::Sqrt(Box::new(quadratic_form(a))), beta);
                let root = bin(BinOp::Mul, Expr::Num(0.5), Expr::Pow(Box::new(f.clone()), 2.0));
                Ok(
                    LagrangianSpec::new(n, Expression::from_expr(root, n), format!("randers(n={n})"))?
                        .with_guard(Expression::from_expr(f, n)),
                )
            }
            BuiltinFamily::QuarticMinkowski { coefficients } => {
                let n = coefficients.len();
                if n == 0 {
                    return Err(Error::InvalidInput("no coefficients".into()));
                }
                let r2 = sum((0..n).map(|i| Expr::Pow(Box::new(var(VarKind::Y, i)), 2.0)).collect());
                let mut terms = vec![Expr::Pow(Box::new(r2), 2.0)];
                for (i, &c) in coefficients.iter().enumerate() {
                    if c != 0.0 {
                        terms.push(bin(
                            BinOp::Mul,
                            Expr::Num(c),
                            Expr::Pow(Box::new(var(VarKind::Y, i)), 4.0),
                        ));
                    }
                }
                let root = bin(BinOp::Mul, Expr::Num(0.5), Expr::Sqrt(Box::new(sum(terms))));
                LagrangianSpec::new(n, Expression::from_expr(root, n), format!("quartic_minkowski(n={n})"))
            }
        }
    }
}

fn identity_entries(n: usize) -> Vec<Vec<Expression>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Expression::constant(if i == j { 1.0 } else { 0.0 }, n))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    /// `max_s |L(x, s y) − s² L(x, y)| / (1 + |s² L|)`.
    pub lagrangian_residual: f64,
    /// `max_s max |g(x, s y) − g(x, y)| / (1 + max |g|)`, when requested.
    pub metric_residual: Option<f64>,
}

fn vertical_hessian(spec: &LagrangianSpec, p: &BasePoint) -> Result<Vec<f64>> {
    let n = spec.n;
    let ctx = JetContext::new(p.coords(), 2)?;
    let l = spec.evaluate(&ctx.seed_all())?;
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            g[a * n + b] = l.derivative(&MultiIndex::from_slots(2 * n, &[n + a, n + b]))?;
        }
    }
    Ok(g)
}

/// Residual of degree-two positive homogeneity in `y` over the given scales.
pub fn check_homogeneity(
    spec: &LagrangianSpec,
    p: &BasePoint,
    scales: &[f64],
    check_metric: bool,
) -> Result<HomogeneityReport> {
    if scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidInput("scales must be positive".into()));
    }
    let base = spec.evaluate(&p.coords())?;
    let g0 = if check_metric {
        Some(vertical_hessian(spec, p)?)
    } else {
        None
    };
    let gscale = g0
        .as_ref()
        .map_or(0.0, |g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut lres = 0.0f64;
    let mut gres = 0.0f64;
    for &s in scales {
        let q = p.scaled(s);
        let v = spec.evaluate(&q.coords())?;
        let expect = s * s * base;
        lres = lres.max((v - expect).abs() / (1.0 + expect.abs()));
        if let Some(g0) = &g0 {
            let g = vertical_hessian(spec, &q)?;
            let d = g.iter().zip(g0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            gres = gres.max(d / (1.0 + gscale));
        }
    }
    Ok(HomogeneityReport {
        lagrangian_residual: lres,
        metric_residual: g0.map(|_| gres),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: &[f64], y: &[f64]) -> BasePoint {
        BasePoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_is_exactly_homogeneous() {
        let spec = BuiltinFamily::euclidean(2).build().unwrap();
        let r = check_homogeneity(&spec, &point(&[0.3, -1.0], &[1.5, 0.25]), &[2.0], true).unwrap();
        assert_eq!(r.lagrangian_residual, 0.0);
        assert_eq!(r.metric_residual, Some(0.0));
    }

    #[test]
    fn randers_homogeneity() {
        let spec = BuiltinFamily::randers_rotational(2, 0.3).build().unwrap();
        let r = check_homogeneity(&spec, &point(&[0.2, -0.4], &[0.7, 1.1]), &[0.5, 2.0, 7.0], true).unwrap();
        assert!(r.lagrangian_residual < 1e-12, "{r:?}");
        assert!(r.metric_residual.unwrap() < 1e-12, "{r:?}");
    }

    #[test]
    fn rational_expression_homogeneity() {
        let spec = LagrangianSpec::parse("y1^3/(y1+y2) + x1*y2^2", 2).unwrap();
        let r = check_homogeneity(&spec, &point(&[0.6, 0.1], &[1.2, 0.4]), &[3.0], false).unwrap();
        assert!(r.lagrangian_residual < 1e-12);
        assert!(r.metric_residual.is_none());
    }

    #[test]
    fn non_homogeneous_is_detected() {
        let spec = LagrangianSpec::parse("y1^2 + y2^3", 2).unwrap();
        let r = check_homogeneity(&spec, &point(&[0.0, 0.0], &[1.0, 1.0]), &[2.0], false).unwrap();
        assert!(r.lagrangian_residual > 0.1);
    }

    #[test]
    fn rejects_bad_scales() {
        let spec = BuiltinFamily::euclidean(2).build().unwrap();
        assert!(check_homogeneity(&spec, &point(&[0.0, 0.0], &[1.0, 0.0]), &[0.0], false).is_err());
    }

    #[test]
    fn builtin_validation() {
        assert!(BuiltinFamily::riemannian(&[vec!["1", "x1"], vec!["0", "1"]])
            .unwrap_err()
            .to_string()
            .contains("symmetric"));
        assert!(BuiltinFamily::riemannian(&[vec!["y1", "0"], vec!["0", "1"]]).is_err());
        let bad = BuiltinFamily::randers_constant(2, 1.2).build();
        assert!(bad.is_err());
        let rq = BuiltinFamily::QuarticMinkowski {
            coefficients: vec![0.2, 0.1],
        }
        .build()
        .unwrap();
        let r = check_homogeneity(&rq, &point(&[0.0, 0.0], &[0.3, 1.0]), &[0.5, 4.0], true).unwrap();
        assert!(r.lagrangian_residual < 1e-12);
        assert!(r.metric_residual.unwrap() < 1e-12);
    }

    #[test]
    fn randers_guard() {
        let spec = BuiltinFamily::randers_constant(2, 0.3).build().unwrap();
        assert!(spec.guard_holds(&point(&[0.0, 0.0], &[-1.0, 0.0])));
        let v = spec.evaluate(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((v - 0.845).abs() < 1e-15);
    }
}
