//! Point-wise first-layer geometry of a Finsler Lagrangian.
//!
//! [`PointGeometry`] expands the Lagrangian as a jet about one point of the
//! slit tangent bundle and derives every first-layer object from it: the
//! vertical Hessian `g`, Cartan torsion, spray, Barthel non-linear
//! connection, `δ/δx`, the Christoffel-type symbols, Berwald coefficients,
//! Landsberg tensor and the non-linear curvature. Each derived object is
//! itself kept as a jet about the point (a truncated Taylor polynomial of the
//! field), so downstream code differentiates it with [`Jet::partial`]
//! instead of hand-written derivative formulas. Every derivative costs one
//! order; the jet tells you when the budget is exhausted.
//!
//! Variable layout: slots `0..n` are `x¹..xⁿ`, slots `n..2n` are `y¹..yⁿ`.
//! Flat tensor storage is row-major, `T^a_bc` at `(a·n + b)·n + c`.

use std::cell::OnceCell;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dsl::{Expression, LagrangianSpec};
use crate::error::{Error, Result};
use crate::jet::{invert_matrix, Jet, JetContext, DEFAULT_ORDER};

/// Relative degeneracy tolerance for the metric: smallest absolute
/// eigenvalue against the max row norm.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::InvalidInput(format!(
                "x has {} entries, y has {}",
                x.len(),
                y.len()
            )));
        }
        if !(y.iter().map(|v| v * v).sum::<f64>() > 0.0) {
            return Err(Error::InvalidInput("y must be nonzero".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(BasePoint { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `(x, y)` concatenated.
    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn scaled(&self, s: f64) -> BasePoint {
        BasePoint {
            x: self.x.clone(),
            y: self.y.iter().map(|v| v * s).collect(),
        }
    }
}

impl std::fmt::Display for BasePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x={:?} y={:?}", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    None,
    /// `T_abc = T_bac`
    FirstTwo,
    /// `T_abc = T_acb`
    LastTwo,
    Total,
}

/// Rank-3 array with a declared index symmetry. Construction projects onto
/// the symmetry class and records how far the input was from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub n: usize,
    pub data: Vec<f64>,
    pub symmetry: Symmetry,
    /// Max deviation of the raw input from its symmetrization.
    pub asymmetry: f64,
}

#[inline]
pub(crate) fn idx3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

impl Tensor3 {
    pub fn new(n: usize, raw: Vec<f64>, symmetry: Symmetry) -> Self {
        assert_eq!(raw.len(), n * n * n);
        let mut data = raw.clone();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v = |i, j, k| raw[idx3(n, i, j, k)];
                    data[idx3(n, a, b, c)] = match symmetry {
                        Symmetry::None => v(a, b, c),
                        Symmetry::FirstTwo => 0.5 * (v(a, b, c) + v(b, a, c)),
                        Symmetry::LastTwo => 0.5 * (v(a, b, c) + v(a, c, b)),
                        Symmetry::Total => {
                            (v(a, b, c) + v(a, c, b) + v(b, a, c) + v(b, c, a) + v(c, a, b) + v(c, b, a)) / 6.0
                        }
                    };
                }
            }
        }
        let asymmetry = raw.iter().zip(&data).fold(0.0f64, |m, (r, d)| m.max((r - d).abs()));
        Tensor3 {
            n,
            data,
            symmetry,
            asymmetry,
        }
    }

    pub fn zeros(n: usize, symmetry: Symmetry) -> Self {
        Tensor3::new(n, vec![0.0; n * n * n], symmetry)
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[idx3(self.n, a, b, c)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    /// Max-norm distance to another tensor of the same shape.
    pub fn distance(&self, other: &Tensor3) -> f64 {
        max_diff(&self.data, &other.data)
    }
}

/// Rank-4 array, used for the third y-derivatives of the spray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub n: usize,
    /// Row-major, exactly symmetric.
    pub g: Vec<f64>,
    /// `(positive, negative)` eigenvalue counts.
    pub signature: (usize, usize),
    pub det: f64,
    pub min_abs_eigenvalue: f64,
    /// Max absolute row sum.
    pub scale: f64,
}

impl MetricTensor {
    pub fn from_values(n: usize, g: Vec<f64>) -> Self {
        let m = DMatrix::from_row_slice(n, n, &g);
        let eig = SymmetricEigen::new(m.clone());
        let pos = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
        let neg = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
        let min_abs = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let scale = (0..n)
            .map(|i| (0..n).map(|j| g[i * n + j].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        MetricTensor {
            n,
            g,
            signature: (pos, neg),
            det: m.determinant(),
            min_abs_eigenvalue: min_abs,
            scale,
        }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.n + b]
    }

    pub fn is_degenerate(&self, tol: f64) -> bool {
        !(self.min_abs_eigenvalue > tol * self.scale)
    }
}

/// Spray coefficients `G^a` and the Barthel connection `N^a_b = ∂G^a/∂y^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprayData {
    pub spray: Vec<f64>,
    /// Row-major `N^a_b`.
    pub nonlinear: Vec<f64>,
}

/// A non-linear connection field `N^a_b(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NonlinearField {
    /// Barthel connection of the Lagrangian.
    Barthel,
    /// User-supplied coefficients, row-major `N^a_b`.
    Expressions(Vec<Expression>),
    /// Barthel plus the given row-major perturbation.
    BarthelPlus(Vec<Expression>),
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn jet_sum(zero: &Jet, terms: impl IntoIterator<Item = Jet>) -> Jet {
    terms.into_iter().fold(zero.clone(), |acc, t| acc + t)
}

pub(crate) fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// All first-layer objects of a Lagrangian at one base point, as jets.
pub struct PointGeometry {
    n: usize,
    point: BasePoint,
    ctx: JetContext,
    vars: Vec<Jet>,
    zero: Jet,
    lagrangian: Jet,
    dl_dy: Vec<Jet>,
    g: Vec<Jet>,
    metric: MetricTensor,
    degeneracy_tol: f64,
    ginv: OnceCell<Result<Vec<Jet>>>,
    spray: OnceCell<Result<Vec<Jet>>>,
    nonlinear: OnceCell<Result<Vec<Jet>>>,
    cartan: OnceCell<Result<Vec<Jet>>>,
    formal: OnceCell<Result<Vec<Jet>>>,
    horizontal: OnceCell<Result<Vec<Jet>>>,
    berwald: OnceCell<Result<Vec<Jet>>>,
    landsberg: OnceCell<Result<Vec<Jet>>>,
    curvature: OnceCell<Result<Vec<Jet>>>,
}

impl std::fmt::Debug for PointGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointGeometry")
            .field("point", &self.point)
            .field("order", &self.ctx.order())
            .finish()
    }
}

impl PointGeometry {
    /// Expands `spec` about `p` to jet order `order`. The metric may be
    /// degenerate here; objects that need `g⁻¹` report that lazily.
    pub fn new(spec: &LagrangianSpec, p: &BasePoint, order: usize) -> Result<Self> {
        let n = spec.n;
        if p.n() != n {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, Lagrangian has {n}",
                p.n()
            )));
        }
        if order < 2 {
            return Err(Error::InvalidInput("jet order must be at least 2".into()));
        }
        let ctx = JetContext::new(p.coords(), order)?;
        let vars = ctx.seed_all();
        let zero = ctx.constant(0.0);
        let lagrangian = spec.evaluate(&vars)?;
        let dl_dy: Vec<Jet> = (0..n)
            .map(|a| lagrangian.partial(n + a))
            .collect::<std::result::Result<_, _>>()?;
        let mut g = vec![zero.clone(); n * n];
        for a in 0..n {
            for b in a..n {
                let v = dl_dy[a].partial(n + b)?;
                g[b * n + a] = v.clone();
                g[a * n + b] = v;
            }
        }
        let metric = MetricTensor::from_values(n, values(&g));
        Ok(PointGeometry {
            n,
            point: p.clone(),
            ctx,
            vars,
            zero,
            lagrangian,
            dl_dy,
            g,
            metric,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            ginv: OnceCell::new(),
            spray: OnceCell::new(),
            nonlinear: OnceCell::new(),
            cartan: OnceCell::new(),
            formal: OnceCell::new(),
            horizontal: OnceCell::new(),
            berwald: OnceCell::new(),
            landsberg: OnceCell::new(),
            curvature: OnceCell::new(),
        })
    }

    pub fn with_degeneracy_tol(mut self, tol: f64) -> Self {
        self.degeneracy_tol = tol;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &BasePoint {
        &self.point
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    /// Seeded coordinate jets, `x` then `y`.
    pub fn vars(&self) -> &[Jet] {
        &self.vars
    }

    pub fn y(&self, a: usize) -> &Jet {
        &self.vars[self.n + a]
    }

    pub fn zero(&self) -> &Jet {
        &self.zero
    }

    pub fn constant(&self, c: f64) -> Jet {
        self.ctx.constant(c)
    }

    pub fn lagrangian(&self) -> &Jet {
        &self.lagrangian
    }

    /// `∂L/∂y^a` jets.
    pub fn lagrangian_dy(&self) -> &[Jet] {
        &self.dl_dy
    }

    /// Vertical Hessian jets, row-major.
    pub fn g(&self) -> &[Jet] {
        &self.g
    }

    pub fn metric(&self) -> &MetricTensor {
        &self.metric
    }

    pub fn is_degenerate(&self) -> bool {
        self.metric.is_degenerate(self.degeneracy_tol)
    }

    pub fn ginv(&self) -> Result<&[Jet]> {
        self.ginv
            .get_or_init(|| {
                if self.is_degenerate() {
                    return Err(Error::DegenerateMetric {
                        point: self.point.to_string(),
                        min_abs_eigenvalue: self.metric.min_abs_eigenvalue,
                        scale: self.metric.scale,
                    });
                }
                let (inv, _) = invert_matrix(&self.g, self.n)?;
                Ok(inv)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Spray coefficients
    /// `G^a = ½ g^{ad} (∂²L/∂x^c∂y^d y^c − ∂L/∂x^d)`.
    pub fn spray(&self) -> Result<&[Jet]> {
        self.spray
            .get_or_init(|| {
                let n = self.n;
                let ginv = self.ginv()?;
                let mut rhs = Vec::with_capacity(n);
                for d in 0..n {
                    let mut acc = -self.lagrangian.partial(d)?;
                    for c in 0..n {
                        acc = acc + self.dl_dy[d].partial(c)? * self.vars[n + c].clone();
                    }
                    rhs.push(acc);
                }
                Ok((0..n)
                    .map(|a| jet_sum(&self.zero, (0..n).map(|d| &ginv[a * n + d] * &rhs[d])).scale(0.5))
                    .collect())
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Barthel connection `N^a_b = ∂G^a/∂y^b`, row-major.
    pub fn nonlinear(&self) -> Result<&[Jet]> {
        self.nonlinear
            .get_or_init(|| {
                let n = self.n;
                let spray = self.spray()?;
                let mut out = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        out.push(spray[a].partial(n + b)?);
                    }
                }
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// `δf/δx^b = ∂f/∂x^b − N^c_b ∂f/∂y^c` with the Barthel connection.
    pub fn delta(&self, f: &Jet, b: usize) -> Result<Jet> {
        self.delta_with(self.nonlinear()?, f, b)
    }

    /// `δ/δx^b` for an arbitrary non-linear connection (row-major `N^a_b`).
    pub fn delta_with(&self, nl: &[Jet], f: &Jet, b: usize) -> Result<Jet> {
        let n = self.n;
        let mut acc = f.partial(b)?;
        for c in 0..n {
            acc = acc - &nl[c * n + b] * &f.partial(n + c)?;
        }
        Ok(acc)
    }

    /// Cartan torsion `C_abc = ½ ∂g_ab/∂y^c` (all indices down).
    pub fn cartan(&self) -> Result<&[Jet]> {
        self.cartan
            .get_or_init(|| {
                let n = self.n;
                let mut out = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            out.push(self.g[a * n + b].partial(n + c)?.scale(0.5));
                        }
                    }
                }
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// `C^a_bc = g^{ad} C_dbc`.
    pub fn cartan_raised(&self) -> Result<Vec<Jet>> {
        self.raise_first(self.cartan()?)
    }

    /// Raises the first index of a rank-3 jet array with `g⁻¹`.
    pub fn raise_first(&self, t: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        let ginv = self.ginv()?;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(jet_sum(
                        &self.zero,
                        (0..n).map(|d| &ginv[a * n + d] * &t[idx3(n, d, b, c)]),
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Lowers the first index of a rank-3 jet array with `g`.
    pub fn lower_first(&self, t: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(jet_sum(
                        &self.zero,
                        (0..n).map(|d| &self.g[a * n + d] * &t[idx3(n, d, b, c)]),
                    ));
                }
            }
        }
        out
    }

    fn christoffel_with(&self, deriv: impl Fn(&Jet, usize) -> Result<Jet>) -> Result<Vec<Jet>> {
        let n = self.n;
        let ginv = self.ginv()?;
        // dg[(k * n + a) * n + b] = D_k g_ab
        let mut dg = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    dg.push(deriv(&self.g[a * n + b], k)?);
                }
            }
        }
        let d = |k: usize, a: usize, b: usize| &dg[(k * n + a) * n + b];
        let mut lowered = Vec::with_capacity(n * n * n);
        for m in 0..n {
            for b in 0..n {
                for c in 0..n {
                    lowered.push((d(b, m, c) + d(c, m, b) - d(m, b, c).clone()).scale(0.5));
                }
            }
        }
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(jet_sum(
                        &self.zero,
                        (0..n).map(|m| &ginv[a * n + m] * &lowered[idx3(n, m, b, c)]),
                    ));
                }
            }
        }
        Ok(out)
    }

    /// `γ^a_bc` from plain x-derivatives of `g`.
    pub fn formal_christoffel(&self) -> Result<&[Jet]> {
        self.formal
            .get_or_init(|| self.christoffel_with(|f, k| Ok(f.partial(k)?)))
            .as_deref()
            .map_err(Clone::clone)
    }

    /// `Γ^a_bc` from `δ/δx` derivatives of `g` with the Barthel connection.
    pub fn horizontal_christoffel(&self) -> Result<&[Jet]> {
        self.horizontal
            .get_or_init(|| {
                let nl = self.nonlinear()?.to_vec();
                self.christoffel_with(|f, k| self.delta_with(&nl, f, k))
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Berwald coefficients `G^a_bc = ∂²G^a/∂y^b∂y^c`.
    pub fn berwald(&self) -> Result<&[Jet]> {
        self.berwald
            .get_or_init(|| {
                let n = self.n;
                let nl = self.nonlinear()?;
                let mut out = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            out.push(nl[a * n + c].partial(n + b)?);
                        }
                    }
                }
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// `G^a_bcd = ∂³G^a/∂y^b∂y^c∂y^d`, index `((a·n + b)·n + c)·n + d`.
    pub fn berwald_third(&self) -> Result<Vec<Jet>> {
        let n = self.n;
        let g2 = self.berwald()?;
        let mut out = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        out.push(g2[idx3(n, a, b, c)].partial(n + d)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Landsberg tensor `L_abc = −½ y^r g_rd G^d_abc`.
    pub fn landsberg(&self) -> Result<&[Jet]> {
        self.landsberg
            .get_or_init(|| {
                let n = self.n;
                let g3 = self.berwald_third()?;
                let ylow: Vec<Jet> = (0..n)
                    .map(|d| jet_sum(&self.zero, (0..n).map(|r| self.y(r) * &self.g[r * n + d])))
                    .collect();
                let mut out = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            out.push(
                                jet_sum(
                                    &self.zero,
                                    (0..n).map(|d| &ylow[d] * &g3[((d * n + a) * n + b) * n + c]),
                                )
                                .scale(-0.5),
                            );
                        }
                    }
                }
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Non-linear curvature `R^a_bc = δN^a_c/δx^b − δN^a_b/δx^c`.
    pub fn nonlinear_curvature(&self) -> Result<&[Jet]> {
        self.curvature
            .get_or_init(|| {
                let n = self.n;
                let nl = self.nonlinear()?.to_vec();
                let mut dn = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            // δ_b N^a_c
                            dn.push(self.delta_with(&nl, &nl[a * n + c], b)?);
                        }
                    }
                }
                let mut out = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            out.push(&dn[idx3(n, a, b, c)] - &dn[idx3(n, a, c, b)]);
                        }
                    }
                }
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Jets of a non-linear connection field, row-major `N^a_b`.
    pub fn nonlinear_field(&self, field: &NonlinearField) -> Result<Vec<Jet>> {
        let n = self.n;
        let eval = |exprs: &[Expression]| -> Result<Vec<Jet>> {
            if exprs.len() != n * n {
                return Err(Error::InvalidInput(format!(
                    "non-linear connection needs {} entries, got {}",
                    n * n,
                    exprs.len()
                )));
            }
            exprs.iter().map(|e| Ok(e.evaluate(&self.vars)?)).collect()
        };
        match field {
            NonlinearField::Barthel => Ok(self.nonlinear()?.to_vec()),
            NonlinearField::Expressions(e) => eval(e),
            NonlinearField::BarthelPlus(e) => {
                let base = self.nonlinear()?;
                Ok(base.iter().zip(eval(e)?).map(|(a, b)| a + &b).collect())
            }
        }
    }

    /// Torsion `τ^a_bc = N^a_cb − N^a_bc` with `N^a_bc = ∂N^a_c/∂y^b`.
    pub fn nonlinear_torsion_of(&self, nl: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        let mut nbc = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    nbc.push(nl[a * n + c].partial(n + b)?);
                }
            }
        }
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push(&nbc[idx3(n, a, c, b)] - &nbc[idx3(n, a, b, c)]);
                }
            }
        }
        Ok(out)
    }

    fn tensor(&self, jets: &[Jet], symmetry: Symmetry) -> Tensor3 {
        Tensor3::new(self.n, values(jets), symmetry)
    }

    pub fn cartan_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.cartan()?, Symmetry::Total))
    }

    pub fn formal_christoffel_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.formal_christoffel()?, Symmetry::LastTwo))
    }

    pub fn horizontal_christoffel_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.horizontal_christoffel()?, Symmetry::LastTwo))
    }

    pub fn berwald_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.berwald()?, Symmetry::LastTwo))
    }

    pub fn landsberg_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.landsberg()?, Symmetry::Total))
    }

    pub fn nonlinear_curvature_tensor(&self) -> Result<Tensor3> {
        Ok(self.tensor(self.nonlinear_curvature()?, Symmetry::None))
    }

    pub fn spray_data(&self) -> Result<SprayData> {
        Ok(SprayData {
            spray: values(self.spray()?),
            nonlinear: values(self.nonlinear()?),
        })
    }

    /// `max |G^a_bc − Γ^a_bc − g^{ad} L_dbc|`.
    pub fn eq4_residual(&self) -> Result<f64> {
        let lr = self.raise_first(self.landsberg()?)?;
        let gb = self.berwald()?;
        let gh = self.horizontal_christoffel()?;
        Ok(gb.iter().zip(gh).zip(&lr).fold(0.0f64, |m, ((b, h), l)| {
            m.max((b.value() - h.value() - l.value()).abs())
        }))
    }
}

fn at(spec: &LagrangianSpec, p: &BasePoint) -> Result<PointGeometry> {
    PointGeometry::new(spec, p, DEFAULT_ORDER)
}

/// Vertical Hessian at `p`; errors if it is degenerate.
pub fn metric(spec: &LagrangianSpec, p: &BasePoint) -> Result<MetricTensor> {
    let geo = at(spec, p)?;
    if geo.is_degenerate() {
        return Err(Error::DegenerateMetric {
            point: p.to_string(),
            min_abs_eigenvalue: geo.metric.min_abs_eigenvalue,
            scale: geo.metric.scale,
        });
    }
    Ok(geo.metric.clone())
}

pub fn inverse_metric(g: &MetricTensor) -> Result<Vec<f64>> {
    if g.is_degenerate(DEFAULT_DEGENERACY_TOL) {
        return Err(Error::DegenerateMetric {
            point: "<matrix>".into(),
            min_abs_eigenvalue: g.min_abs_eigenvalue,
            scale: g.scale,
        });
    }
    Ok(invert_matrix(&g.g, g.n)?.0)
}

pub fn cartan_torsion(spec: &LagrangianSpec, p: &BasePoint) -> Result<Tensor3> {
    at(spec, p)?.cartan_tensor()
}

pub fn spray(spec: &LagrangianSpec, p: &BasePoint) -> Result<SprayData> {
    at(spec, p)?.spray_data()
}

pub fn nonlinear_torsion(spec: &LagrangianSpec, p: &BasePoint, field: &NonlinearField) -> Result<Tensor3> {
    let geo = at(spec, p)?;
    let nl = geo.nonlinear_field(field)?;
    Ok(geo.tensor(&geo.nonlinear_torsion_of(&nl)?, Symmetry::None))
}

/// `δf/δx^b` of a scalar field given in the expression language.
pub fn delta_derivative(field: &Expression, spec: &LagrangianSpec, p: &BasePoint, b: usize) -> Result<f64> {
    let geo = at(spec, p)?;
    if b >= spec.n {
        return Err(Error::InvalidInput(format!("direction {b} out of range")));
    }
    let f = field.evaluate(geo.vars())?;
    Ok(geo.delta(&f, b)?.value())
}

pub fn formal_christoffel(spec: &LagrangianSpec, p: &BasePoint) -> Result<Tensor3> {
    at(spec, p)?.formal_christoffel_tensor()
}

pub fn horizontal_christoffel(spec: &LagrangianSpec, p: &BasePoint) -> Result<Tensor3> {
    at(spec, p)?.horizontal_christoffel_tensor()
}

pub fn berwald_coefficients(spec: &LagrangianSpec, p: &BasePoint) -> Result<(Tensor3, Tensor4)> {
    let geo = at(spec, p)?;
    let third = Tensor4 {
        n: spec.n,
        data: values(&geo.berwald_third()?),
    };
    Ok((geo.berwald_tensor()?, third))
}

pub fn landsberg(spec: &LagrangianSpec, p: &BasePoint) -> Result<Tensor3> {
    at(spec, p)?.landsberg_tensor()
}

pub fn nonlinear_curvature(spec: &LagrangianSpec, p: &BasePoint) -> Result<Tensor3> {
    at(spec, p)?.nonlinear_curvature_tensor()
}

pub fn eq4_residual(spec: &LagrangianSpec, p: &BasePoint) -> Result<f64> {
    at(spec, p)?.eq4_residual()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, BuiltinFamily};

    fn pt(x: &[f64], y: &[f64]) -> BasePoint {
        BasePoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn surface() -> LagrangianSpec {
        BuiltinFamily::riemannian(&[vec!["1", "0"], vec!["0", "x1^2"]])
            .unwrap()
            .build()
            .unwrap()
    }

    fn randers() -> LagrangianSpec {
        BuiltinFamily::randers_rotational(2, 0.3).build().unwrap()
    }

    #[test]
    fn euclidean_metric() {
        let spec = BuiltinFamily::euclidean(2).build().unwrap();
        let g = metric(&spec, &pt(&[0.4, 0.1], &[3.0, 4.0])).unwrap();
        assert_eq!(g.g, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.signature, (2, 0));
        assert_eq!(g.det, 1.0);
    }

    #[test]
    fn surface_metric_and_spray() {
        let spec = surface();
        let p = pt(&[2.0, 0.3], &[0.7, -1.1]);
        let g = metric(&spec, &p).unwrap();
        assert_eq!(g.g, vec![1.0, 0.0, 0.0, 4.0]);
        let s = spray(&spec, &p).unwrap();
        let (x1, y1, y2) = (2.0, 0.7, -1.1);
        assert!((s.spray[0] - (-0.5 * x1 * y2 * y2)).abs() < 1e-14);
        assert!((s.spray[1] - y1 * y2 / x1).abs() < 1e-14);
        // N^a_b y^b = 2 G^a
        for a in 0..2 {
            let ny = s.nonlinear[a * 2] * y1 + s.nonlinear[a * 2 + 1] * y2;
            assert!((ny - 2.0 * s.spray[a]).abs() < 1e-13);
        }
    }

    #[test]
    fn surface_christoffels() {
        let spec = surface();
        let p = pt(&[2.0, 0.3], &[0.7, -1.1]);
        let gam = formal_christoffel(&spec, &p).unwrap();
        assert!((gam.get(0, 1, 1) + 2.0).abs() < 1e-14);
        assert!((gam.get(1, 0, 1) - 0.5).abs() < 1e-14);
        assert_eq!(gam.get(1, 0, 1), gam.get(1, 1, 0));
        let big = horizontal_christoffel(&spec, &p).unwrap();
        assert!(big.distance(&gam) < 1e-9);
        assert!(cartan_torsion(&spec, &p).unwrap().max_abs() == 0.0);
        assert!(landsberg(&spec, &p).unwrap().max_abs() < 1e-9);
        assert!(eq4_residual(&spec, &p).unwrap() < 1e-9);
        // flat polar metric: curvature vanishes
        assert!(nonlinear_curvature(&spec, &p).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn inverse_metric_cases() {
        let id = MetricTensor::from_values(2, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(inverse_metric(&id).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        let d = MetricTensor::from_values(2, vec![1.0, 0.0, 0.0, 4.0]);
        assert_eq!(inverse_metric(&d).unwrap(), vec![1.0, 0.0, 0.0, 0.25]);
        let deg = MetricTensor::from_values(2, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(inverse_metric(&deg).is_err());
    }

    #[test]
    fn degenerate_metric_reported() {
        let spec = LagrangianSpec::parse("0.5*y1^2", 2).unwrap();
        let p = pt(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(metric(&spec, &p), Err(Error::DegenerateMetric { .. })));
        assert!(spray(&spec, &p).is_err());
    }

    #[test]
    fn randers_euler_relations() {
        let spec = randers();
        let p = pt(&[0.3, -0.5], &[0.8, 0.45]);
        let geo = PointGeometry::new(&spec, &p, 5).unwrap();
        let y = &p.y;
        let c = geo.cartan_tensor().unwrap();
        let l = geo.landsberg_tensor().unwrap();
        let nl = values(geo.nonlinear().unwrap());
        let gb = geo.berwald_tensor().unwrap();
        let spray = values(geo.spray().unwrap());
        for a in 0..2 {
            for b in 0..2 {
                let cy: f64 = (0..2).map(|k| c.get(k, a, b) * y[k]).sum();
                let ly: f64 = (0..2).map(|k| l.get(a, b, k) * y[k]).sum();
                let gy: f64 = (0..2).map(|k| gb.get(a, k, b) * y[k]).sum();
                assert!(cy.abs() < 1e-10, "C y = {cy}");
                assert!(ly.abs() < 1e-8, "L y = {ly}");
                assert!((gy - nl[a * 2 + b]).abs() < 1e-8);
            }
            let ny: f64 = (0..2).map(|b| nl[a * 2 + b] * y[b]).sum();
            assert!((ny - 2.0 * spray[a]).abs() < 1e-10);
        }
        assert!(l.max_abs() > 1e-3, "rotational Randers should not be Landsberg");
        assert!(c.asymmetry < 1e-12 && l.asymmetry < 1e-8);
        assert!(geo.eq4_residual().unwrap() < 1e-7);
    }

    #[test]
    fn lagrangian_is_horizontally_constant() {
        let spec = randers();
        let p = pt(&[0.3, -0.5], &[0.8, 0.45]);
        for b in 0..2 {
            let v = delta_derivative(&spec.expr, &spec, &p, b).unwrap();
            assert!(v.abs() < 1e-9, "δL/δx^{b} = {v}");
        }
        let one = parse("1", 2).unwrap();
        assert_eq!(delta_derivative(&one, &spec, &p, 0).unwrap(), 0.0);
        let e = BuiltinFamily::euclidean(2).build().unwrap();
        let y1 = parse("y1", 2).unwrap();
        assert_eq!(delta_derivative(&y1, &e, &p, 1).unwrap(), 0.0);
    }

    #[test]
    fn nonlinear_torsion_detects_non_barthel() {
        let spec = randers();
        let p = pt(&[0.3, -0.5], &[0.8, 0.45]);
        let tb = nonlinear_torsion(&spec, &p, &NonlinearField::Barthel).unwrap();
        assert!(tb.max_abs() < 1e-8);
        let e = BuiltinFamily::euclidean(2).build().unwrap();
        let custom: Vec<Expression> = ["0", "y1", "0", "0"].iter().map(|t| parse(t, 2).unwrap()).collect();
        let t = nonlinear_torsion(&e, &p, &NonlinearField::Expressions(custom)).unwrap();
        assert_eq!(t.get(0, 0, 1), -1.0);
        assert_eq!(t.get(0, 1, 0), 1.0);
    }

    #[test]
    fn minkowski_has_no_spray() {
        let spec = BuiltinFamily::randers_constant(2, 0.3).build().unwrap();
        let p = pt(&[0.1, 0.2], &[1.0, 0.0]);
        let s = spray(&spec, &p).unwrap();
        assert!(s.spray.iter().chain(&s.nonlinear).all(|v| *v == 0.0));
        assert!(nonlinear_curvature(&spec, &p).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn tensor_symmetrization_reports_asymmetry() {
        let mut raw = vec![0.0; 8];
        raw[idx3(2, 0, 0, 1)] = 1.0;
        let t = Tensor3::new(2, raw, Symmetry::LastTwo);
        assert_eq!(t.get(0, 0, 1), 0.5);
        assert_eq!(t.get(0, 1, 0), 0.5);
        assert_eq!(t.asymmetry, 0.5);
    }
}
