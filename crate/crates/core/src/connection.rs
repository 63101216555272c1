//! Finsler connections on the pullback bundle and their form-level calculus.
//!
//! A connection is stored at a point by its coordinate coefficients
//! `ω^a_b = A^a_bc dx^c + B^a_bc dy^c`, as jets. Every other description
//! (`H` and `V` against `ω̄`, or `H` and `Ṽ` against `ω̃`) is converted to
//! and from this form, which needs no regularity assumption. With
//! `P^a_c = δ^a_c + B^a_bc y^b` one has `ω̄ = P·dy + (A·y)·dx`; the connection
//! is regular iff `P` is invertible, and then `Q = P⁻¹`, `V = B·Q`,
//! `N = Q·(A·y)`, `H = A − B·N`, `Ṽ = B`.

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::{Expression, LagrangianSpec};
use crate::error::{Error, Result};
use crate::forms::{contract, distance_all, dot_wedge, max_abs_all, CobasisMap, Form};
use crate::geometry::{idx3, jet_sum, max_abs, values, BasePoint, NonlinearField, PointGeometry, Symmetry, Tensor3};
use crate::jet::{invert_matrix, Jet};

/// Regular iff `σ_min / σ_max` of the `{ω, ω̄}` matrix exceeds this.
pub const REGULARITY_RATIO: f64 = 1e-8;
/// Strongly regular iff `max |V^a_bc y^b| ≤ tol · (1 + |V| |y|)`.
pub const STRONG_REGULARITY_TOL: f64 = 1e-9;
/// Admissibility tolerance for symmetry generators, relative to `1 + |W|`.
pub const W_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionKind {
    Chern,
    Berwald,
    Cartan,
    Hashiguchi,
}

impl ConnectionKind {
    pub const ALL: [ConnectionKind; 4] = [
        ConnectionKind::Chern,
        ConnectionKind::Berwald,
        ConnectionKind::Cartan,
        ConnectionKind::Hashiguchi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConnectionKind::Chern => "chern",
            ConnectionKind::Berwald => "berwald",
            ConnectionKind::Cartan => "cartan",
            ConnectionKind::Hashiguchi => "hashiguchi",
        }
    }
}

impl fmt::Display for ConnectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConnectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConnectionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown connection kind `{s}`")))
    }
}

/// Which vertical cobasis a `V` coefficient is expanded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VBasis {
    /// `ω̄ = Dy`
    Bar,
    /// `ω̃ = dy + N dx`
    Tilde,
}

/// A rank-3 coefficient field `T^a_bc(x, y)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TensorField {
    Zero,
    /// Upper-index components in the expression language.
    Expressions(Vec<Expression>),
    /// Constant lowered components `S_def` with the selected slots passed
    /// through the projector `P^d_a = δ^d_a − y^d y_a / (y·g·y)`, then
    /// raised with `g⁻¹`. Projected slots are annihilated by `y`.
    Projected {
        s: Vec<f64>,
        project: [bool; 3],
    },
}

impl TensorField {
    pub fn is_zero(&self) -> bool {
        matches!(self, TensorField::Zero)
    }

    /// Upper-index component jets at the geometry's base point; `None` for
    /// the zero field.
    pub fn jets(&self, geo: &PointGeometry) -> Result<Option<Vec<Jet>>> {
        let n = geo.n();
        match self {
            TensorField::Zero => Ok(None),
            TensorField::Expressions(e) => {
                check_len(e.len(), n)?;
                let out = e
                    .iter()
                    .map(|x| Ok(x.evaluate(geo.vars())?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(out))
            }
            TensorField::Projected { s, project } => {
                check_len(s.len(), n)?;
                let proj = projector(geo)?;
                let mut t: Vec<Jet> = s.iter().map(|&v| geo.constant(v)).collect();
                for (slot, &on) in project.iter().enumerate() {
                    if on {
                        t = project_slot(n, &t, &proj, slot, geo.zero());
                    }
                }
                Ok(Some(geo.raise_first(&t)?))
            }
        }
    }
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if len != n * n * n {
        return Err(Error::InvalidInput(format!(
            "rank-3 field needs {} components, got {len}",
            n * n * n
        )));
    }
    Ok(())
}

/// `P^d_a` at `[d·n + a]`.
fn projector(geo: &PointGeometry) -> Result<Vec<Jet>> {
    let n = geo.n();
    let g = geo.g();
    let ylow: Vec<Jet> = (0..n)
        .map(|a| jet_sum(geo.zero(), (0..n).map(|b| &g[a * n + b] * geo.y(b))))
        .collect();
    let yy = jet_sum(geo.zero(), (0..n).map(|a| &ylow[a] * geo.y(a)));
    let mut out = Vec::with_capacity(n * n);
    for d in 0..n {
        for a in 0..n {
            let delta = geo.constant(if a == d { 1.0 } else { 0.0 });
            out.push(delta - (geo.y(d) * &ylow[a]).div_ref(&yy)?);
        }
    }
    Ok(out)
}

fn project_slot(n: usize, t: &[Jet], proj: &[Jet], slot: usize, zero: &Jet) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n * n);
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let mut idx = [i0, i1, i2];
                let free = idx[slot];
                out.push(jet_sum(
                    zero,
                    (0..n).map(|d| {
                        idx[slot] = d;
                        &proj[d * n + free] * &t[idx3(n, idx[0], idx[1], idx[2])]
                    }),
                ));
            }
        }
    }
    out
}

fn random_tensor<R: Rng + ?Sized>(n: usize, rng: &mut R, magnitude: f64) -> Vec<f64> {
    (0..n * n * n)
        .map(|_| rng.random_range(-magnitude..=magnitude))
        .collect()
}

/// Generator of the symmetry `ω' = ω + W^a_bc ω^c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryW {
    pub field: TensorField,
    /// Amplified symmetries drop the `W_ab y^b = 0` condition.
    pub amplified: bool,
}

impl SymmetryW {
    pub fn zero() -> Self {
        SymmetryW {
            field: TensorField::Zero,
            amplified: false,
        }
    }

    /// Random admissible generator: `W_abc = P^d_a P^e_b S_dec` with
    /// constant `S` symmetric in its first two indices. The amplified
    /// variant skips the projection.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R, magnitude: f64, amplified: bool) -> Self {
        let mut s = random_tensor(n, rng, magnitude);
        for d in 0..n {
            for e in 0..d {
                for c in 0..n {
                    let v = s[idx3(n, d, e, c)];
                    s[idx3(n, e, d, c)] = v;
                }
            }
        }
        SymmetryW {
            field: TensorField::Projected {
                s,
                project: if amplified { [false; 3] } else { [true, true, false] },
            },
            amplified,
        }
    }
}

/// Random totally symmetric, `y`-annihilated shift of the vertical
/// coefficients.
pub fn random_symmetric_shift<R: Rng + ?Sized>(n: usize, rng: &mut R, magnitude: f64) -> TensorField {
    let raw = random_tensor(n, rng, magnitude);
    let s = Tensor3::new(n, raw, Symmetry::Total).data;
    TensorField::Projected { s, project: [true; 3] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WValidation {
    /// `max |W_abc − W_bac|` over the samples.
    pub symmetry_residual: f64,
    /// `max |W_abc y^b|` over the samples.
    pub annihilation_residual: f64,
    pub points: usize,
}

/// Checks the admissibility constraints of `w` at every sample.
pub fn validate_w(w: &SymmetryW, spec: &LagrangianSpec, samples: &[BasePoint], order: usize) -> Result<WValidation> {
    let n = spec.n;
    let mut report = WValidation {
        symmetry_residual: 0.0,
        annihilation_residual: 0.0,
        points: samples.len(),
    };
    for p in samples {
        let geo = PointGeometry::new(spec, p, order)?;
        let Some(jets) = w.field.jets(&geo)? else {
            continue;
        };
        let low = values(&geo.lower_first(&jets));
        let scale = 1.0 + max_abs(&low);
        let mut sym = 0.0f64;
        let mut ann = 0.0f64;
        for a in 0..n {
            for c in 0..n {
                let mut wy = 0.0;
                for b in 0..n {
                    sym = sym.max((low[idx3(n, a, b, c)] - low[idx3(n, b, a, c)]).abs());
                    wy += low[idx3(n, a, b, c)] * p.y[b];
                }
                ann = ann.max(wy.abs());
            }
        }
        report.symmetry_residual = report.symmetry_residual.max(sym / scale);
        report.annihilation_residual = report.annihilation_residual.max(ann / scale);
    }
    if report.symmetry_residual > W_TOL {
        return Err(Error::InadmissibleSymmetry(format!(
            "W_ab is not symmetric: max violation {:e}",
            report.symmetry_residual
        )));
    }
    if !w.amplified && report.annihilation_residual > W_TOL {
        return Err(Error::InadmissibleSymmetry(format!(
            "W_ab y^b does not vanish: max violation {:e}",
            report.annihilation_residual
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConnectionSource {
    Catalogue(ConnectionKind),
    /// `ω = H ω + V ω̄` (or `V ω̃`).
    Custom {
        h: TensorField,
        v: TensorField,
        basis: VBasis,
    },
    /// `ω = A dx + B dy` directly; may be non-regular.
    Coordinate {
        a: TensorField,
        b: TensorField,
    },
    /// `∇^N`: `H = ∂N/∂y`, `V = 0`.
    Induced(NonlinearField),
    /// `ω' = ω + W ω + U ω̄`, with `ω̄` that of the base.
    Deformed {
        base: Box<FinslerConnection>,
        h_shift: TensorField,
        v_shift: TensorField,
    },
    /// `ω + ½ g⁻¹ Dg` of the base.
    CanonicalMetric(Box<FinslerConnection>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinslerConnection {
    pub label: String,
    pub source: ConnectionSource,
}

impl FinslerConnection {
    pub fn catalogue(kind: ConnectionKind) -> Self {
        FinslerConnection {
            label: kind.name().to_string(),
            source: ConnectionSource::Catalogue(kind),
        }
    }

    pub fn custom(label: impl Into<String>, h: TensorField, v: TensorField, basis: VBasis) -> Self {
        FinslerConnection {
            label: label.into(),
            source: ConnectionSource::Custom { h, v, basis },
        }
    }

    pub fn coordinate(label: impl Into<String>, a: TensorField, b: TensorField) -> Self {
        FinslerConnection {
            label: label.into(),
            source: ConnectionSource::Coordinate { a, b },
        }
    }

    pub fn induced(field: NonlinearField) -> Self {
        FinslerConnection {
            label: "induced".into(),
            source: ConnectionSource::Induced(field),
        }
    }

    pub fn deformed(&self, h_shift: TensorField, v_shift: TensorField) -> Self {
        FinslerConnection {
            label: format!("{}+deformation", self.label),
            source: ConnectionSource::Deformed {
                base: Box::new(self.clone()),
                h_shift,
                v_shift,
            },
        }
    }

    pub fn canonical_metric(&self) -> Self {
        FinslerConnection {
            label: format!("canonical({})", self.label),
            source: ConnectionSource::CanonicalMetric(Box::new(self.clone())),
        }
    }

    /// The catalogue kind, if this is a catalogue connection.
    pub fn kind(&self) -> Option<ConnectionKind> {
        match self.source {
            ConnectionSource::Catalogue(k) => Some(k),
            _ => None,
        }
    }

    pub fn at<'g>(&self, geo: &'g PointGeometry) -> Result<ConnectionAtPoint<'g>> {
        let (a, b) = self.coefficients(geo)?;
        Ok(ConnectionAtPoint::from_coefficients(geo, a, b))
    }

    /// Coordinate coefficient jets `(A, B)`.
    pub fn coefficients(&self, geo: &PointGeometry) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let n = geo.n();
        let zeros = || vec![geo.zero().clone(); n * n * n];
        match &self.source {
            ConnectionSource::Catalogue(kind) => {
                let h = match kind {
                    ConnectionKind::Chern | ConnectionKind::Cartan => geo.horizontal_christoffel()?.to_vec(),
                    ConnectionKind::Berwald | ConnectionKind::Hashiguchi => geo.berwald()?.to_vec(),
                };
                let v = match kind {
                    ConnectionKind::Chern | ConnectionKind::Berwald => None,
                    ConnectionKind::Cartan | ConnectionKind::Hashiguchi => Some(geo.cartan_raised()?),
                };
                hv_to_ab(geo, h, v, VBasis::Bar)
            }
            ConnectionSource::Custom { h, v, basis } => {
                let h = h.jets(geo)?.unwrap_or_else(zeros);
                hv_to_ab(geo, h, v.jets(geo)?, *basis)
            }
            ConnectionSource::Coordinate { a, b } => {
                Ok((a.jets(geo)?.unwrap_or_else(zeros), b.jets(geo)?.unwrap_or_else(zeros)))
            }
            ConnectionSource::Induced(field) => {
                let nl = geo.nonlinear_field(field)?;
                let mut h = Vec::with_capacity(n * n * n);
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            h.push(nl[a * n + c].partial(n + b)?);
                        }
                    }
                }
                Ok((h, zeros()))
            }
            ConnectionSource::Deformed { base, h_shift, v_shift } => {
                let (a0, b0) = base.coefficients(geo)?;
                let mut a = a0.clone();
                let mut b = b0.clone();
                if let Some(w) = h_shift.jets(geo)? {
                    a = a.iter().zip(&w).map(|(x, y)| x + y).collect();
                }
                if let Some(u) = v_shift.jets(geo)? {
                    let p = p_matrix(geo, &b0);
                    let ay = ay_matrix(geo, &a0);
                    for i in 0..n {
                        for j in 0..n {
                            for c in 0..n {
                                let k = idx3(n, i, j, c);
                                let ua = jet_sum(geo.zero(), (0..n).map(|d| &u[idx3(n, i, j, d)] * &ay[d * n + c]));
                                let ub = jet_sum(geo.zero(), (0..n).map(|d| &u[idx3(n, i, j, d)] * &p[d * n + c]));
                                a[k] = &a[k] + &ua;
                                b[k] = &b[k] + &ub;
                            }
                        }
                    }
                }
                Ok((a, b))
            }
            ConnectionSource::CanonicalMetric(base) => base.at(geo)?.canonical_coefficients(),
        }
    }
}

/// `ω' = ω + W^a_bc ω^c`.
pub fn apply_symmetry(conn: &FinslerConnection, w: &SymmetryW) -> FinslerConnection {
    let mut out = conn.deformed(w.field.clone(), TensorField::Zero);
    out.label = format!("{}+W", conn.label);
    out
}

/// `N^a_c = T^a_bc y^b`, row-major.
fn contract_y(geo: &PointGeometry, t: &[Jet]) -> Vec<Jet> {
    let n = geo.n();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for c in 0..n {
            out.push(jet_sum(geo.zero(), (0..n).map(|b| &t[idx3(n, a, b, c)] * geo.y(b))));
        }
    }
    out
}

fn ay_matrix(geo: &PointGeometry, a: &[Jet]) -> Vec<Jet> {
    contract_y(geo, a)
}

/// `P^a_c = δ^a_c + B^a_bc y^b`.
fn p_matrix(geo: &PointGeometry, b: &[Jet]) -> Vec<Jet> {
    let n = geo.n();
    let by = contract_y(geo, b);
    by.into_iter()
        .enumerate()
        .map(|(k, v)| if k / n == k % n { v + geo.constant(1.0) } else { v })
        .collect()
}

/// `(T·M)^a_bc = T^a_bd M^d_c`.
fn times_matrix(geo: &PointGeometry, t: &[Jet], m: &[Jet]) -> Vec<Jet> {
    let n = geo.n();
    let mut out = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out.push(jet_sum(
                    geo.zero(),
                    (0..n).map(|d| &t[idx3(n, a, b, d)] * &m[d * n + c]),
                ));
            }
        }
    }
    out
}

fn mat_mul(geo: &PointGeometry, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let n = geo.n();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(jet_sum(geo.zero(), (0..n).map(|k| &x[i * n + k] * &y[k * n + j])));
        }
    }
    out
}

fn check_invertible(m: &[Jet], n: usize, what: &str) -> Result<()> {
    let ratio = singular_ratio(&DMatrix::from_row_slice(n, n, &values(m)));
    if ratio > REGULARITY_RATIO {
        Ok(())
    } else {
        Err(Error::NotRegular(format!(
            "{what} is numerically singular (σ_min/σ_max = {ratio:e})"
        )))
    }
}

fn hv_to_ab(geo: &PointGeometry, h: Vec<Jet>, v: Option<Vec<Jet>>, basis: VBasis) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let n = geo.n();
    let Some(v) = v else {
        return Ok((h, vec![geo.zero().clone(); n * n * n]));
    };
    // A = H + B·N with N = H·y in both expansions
    let nl = contract_y(geo, &h);
    let b = match basis {
        VBasis::Tilde => v,
        VBasis::Bar => {
            let vy = contract_y(geo, &v);
            let q: Vec<Jet> = vy
                .into_iter()
                .enumerate()
                .map(|(k, x)| if k / n == k % n { geo.constant(1.0) - x } else { -x })
                .collect();
            check_invertible(&q, n, "Q")?;
            let (qinv, _) = invert_matrix(&q, n).map_err(|e| Error::NotRegular(format!("Q is singular ({e})")))?;
            times_matrix(geo, &v, &qinv)
        }
    };
    let vm = times_matrix(geo, &b, &nl);
    let a = h.iter().zip(&vm).map(|(x, y)| x + y).collect();
    Ok((a, b))
}

/// `H`, `V` (against `ω̄`), the induced non-linear connection and `Q`.
#[derive(Debug, Clone)]
pub struct HvCoefficients {
    pub h: Vec<Jet>,
    pub v: Vec<Jet>,
    pub nonlinear: Vec<Jet>,
    pub q: Vec<Jet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BianchiResiduals {
    /// `max |DT − R∧ω|`
    pub first_horizontal: f64,
    /// `max |DT̄ − R∧ω̄|`
    pub first_vertical: f64,
    /// `max |DR|`
    pub second: f64,
}

/// `Ω = ω̄^a ∧ g_ab ω^b` with its matrix and non-degeneracy verdict.
#[derive(Debug, Clone)]
pub struct OmegaForm {
    pub form: Form,
    /// `2n×2n` antisymmetric, `Ω = ½ M_ij e^i ∧ e^j`.
    pub matrix: DMatrix<f64>,
    pub det: f64,
    pub singular_ratio: f64,
    pub nondegenerate: bool,
}

fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// A connection evaluated at one point: coefficient jets and lazily built
/// forms over the coordinate cobasis.
pub struct ConnectionAtPoint<'g> {
    geo: &'g PointGeometry,
    a: Vec<Jet>,
    b: Vec<Jet>,
    dx: Vec<Form>,
    omega: Vec<Form>,
    omega_bar: Vec<Form>,
    hv: OnceCell<Result<HvCoefficients>>,
    dg: OnceCell<Result<Vec<Form>>>,
    torsion: OnceCell<Result<Vec<Form>>>,
    vtorsion: OnceCell<Result<Vec<Form>>>,
    curvature: OnceCell<Result<Vec<Form>>>,
}

impl fmt::Debug for ConnectionAtPoint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionAtPoint")
            .field("point", self.geo.point())
            .finish()
    }
}

macro_rules! cached {
    ($cell:expr, $body:expr) => {
        $cell.get_or_init(|| $body).as_deref().map_err(Clone::clone)
    };
}

impl<'g> ConnectionAtPoint<'g> {
    pub fn from_coefficients(geo: &'g PointGeometry, a: Vec<Jet>, b: Vec<Jet>) -> Self {
        let n = geo.n();
        let dim = 2 * n;
        let one = geo.constant(1.0);
        let dx: Vec<Form> = (0..n).map(|c| Form::monomial(dim, &[c], one.clone())).collect();
        let mut omega = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let order = a[idx3(n, i, j, 0)].order().min(b[idx3(n, i, j, 0)].order());
                let mut f = Form::zero(dim, 1, order);
                for c in 0..n {
                    f.add_term(1 << c, a[idx3(n, i, j, c)].clone());
                    f.add_term(1 << (n + c), b[idx3(n, i, j, c)].clone());
                }
                omega.push(f);
            }
        }
        let omega_bar = (0..n)
            .map(|i| {
                let dy = Form::monomial(dim, &[n + i], one.clone());
                (0..n).fold(dy, |acc, j| acc + omega[i * n + j].mul_fn(geo.y(j)))
            })
            .collect();
        ConnectionAtPoint {
            geo,
            a,
            b,
            dx,
            omega,
            omega_bar,
            hv: OnceCell::new(),
            dg: OnceCell::new(),
            torsion: OnceCell::new(),
            vtorsion: OnceCell::new(),
            curvature: OnceCell::new(),
        }
    }

    pub fn geometry(&self) -> &'g PointGeometry {
        self.geo
    }

    pub fn n(&self) -> usize {
        self.geo.n()
    }

    fn dim(&self) -> usize {
        2 * self.n()
    }

    /// `A^a_bc` (coefficients of `dx^c`).
    pub fn a(&self) -> &[Jet] {
        &self.a
    }

    /// `B^a_bc` (coefficients of `dy^c`), equal to `Ṽ`.
    pub fn b(&self) -> &[Jet] {
        &self.b
    }

    /// `ω^a = dx^a`.
    pub fn dx(&self) -> &[Form] {
        &self.dx
    }

    /// Connection forms `ω^a_b`, row-major.
    pub fn omega(&self) -> &[Form] {
        &self.omega
    }

    /// `ω̄^a = Dy^a = dy^a + ω^a_b y^b`.
    pub fn omega_bar(&self) -> &[Form] {
        &self.omega_bar
    }

    fn g_forms(&self) -> Vec<Form> {
        self.geo
            .g()
            .iter()
            .map(|g| Form::function(self.dim(), g.clone()))
            .collect()
    }

    /// `P = δ + B·y`, whose inverse is `Q`.
    pub fn p_matrix(&self) -> Vec<Jet> {
        p_matrix(self.geo, &self.b)
    }

    /// The `2n×2n` matrix whose rows are `{ω^a, ω̄^a}` over `{dx, dy}`.
    pub fn cobasis_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for a in 0..n {
            m[(a, a)] = 1.0;
            for k in 0..dim {
                m[(n + a, k)] = self.omega_bar[a].value(1 << k);
            }
        }
        m
    }

    pub fn regularity_ratio(&self) -> f64 {
        singular_ratio(&self.cobasis_matrix())
    }

    pub fn is_regular(&self) -> bool {
        self.regularity_ratio() > REGULARITY_RATIO
    }

    /// Adapted cobasis map for `{ω, ω̄}`.
    pub fn cobasis_map(&self) -> Result<CobasisMap> {
        let n = self.n();
        let dim = self.dim();
        let mut rows = vec![self.geo.zero().clone(); dim * dim];
        for a in 0..n {
            rows[a * dim + a] = self.geo.constant(1.0);
            for k in 0..dim {
                if let Some(c) = self.omega_bar[a].get(1 << k) {
                    rows[(n + a) * dim + k] = c.clone();
                }
            }
        }
        CobasisMap::new(rows, dim).map_err(|e| Error::NotRegular(e.to_string()))
    }

    pub fn hv(&self) -> Result<&HvCoefficients> {
        self.hv
            .get_or_init(|| {
                let geo = self.geo;
                let p = self.p_matrix();
                check_invertible(&p, geo.n(), "P")?;
                let (q, _) =
                    invert_matrix(&p, geo.n()).map_err(|e| Error::NotRegular(format!("P is singular ({e})")))?;
                let v = times_matrix(geo, &self.b, &q);
                let nonlinear = mat_mul(geo, &q, &ay_matrix(geo, &self.a));
                let bn = times_matrix(geo, &self.b, &nonlinear);
                let h = self.a.iter().zip(&bn).map(|(x, y)| x - y).collect();
                Ok(HvCoefficients { h, v, nonlinear, q })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Values of `Q^a_b = δ^a_b − V^a_cb y^c`.
    pub fn q_matrix(&self) -> Result<Vec<f64>> {
        Ok(values(&self.hv()?.q))
    }

    /// `max |V^a_bc y^b|`.
    pub fn vertical_y_residual(&self) -> Result<f64> {
        let hv = self.hv()?;
        Ok(max_abs(&values(&contract_y(self.geo, &hv.v))))
    }

    pub fn is_strongly_regular(&self) -> Result<bool> {
        let hv = self.hv()?;
        let ynorm = self.geo.point().y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = 1.0 + max_abs(&values(&hv.v)) * ynorm;
        Ok(self.vertical_y_residual()? <= STRONG_REGULARITY_TOL * scale)
    }

    /// `Dφ^a = dφ^a + ω^a_b ∧ φ^b` for a `TM`-valued form.
    pub fn d_vector(&self, phi: &[Form]) -> Result<Vec<Form>> {
        let n = self.n();
        (0..n)
            .map(|a| {
                let d = phi[a].d()?;
                Ok((0..n).fold(d, |acc, b| acc + self.omega[a * n + b].wedge(&phi[b])))
            })
            .collect()
    }

    /// `DΦ_ab = dΦ_ab − ω^c_a ∧ Φ_cb − ω^c_b ∧ Φ_ac` for a form with two
    /// lower indices.
    pub fn d_bilinear(&self, phi: &[Form]) -> Result<Vec<Form>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = phi[a * n + b].d()?;
                for c in 0..n {
                    acc = acc - self.omega[c * n + a].wedge(&phi[c * n + b]);
                    acc = acc - self.omega[c * n + b].wedge(&phi[a * n + c]);
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// `Dψ_b = dψ_b − ω^c_b ∧ ψ_c` for a form with one lower index.
    pub fn d_covector(&self, psi: &[Form]) -> Result<Vec<Form>> {
        let n = self.n();
        (0..n)
            .map(|b| {
                let d = psi[b].d()?;
                Ok((0..n).fold(d, |acc, c| acc - self.omega[c * n + b].wedge(&psi[c])))
            })
            .collect()
    }

    /// `(DR)^a_b = dR^a_b + ω^a_c ∧ R^c_b − (−1)^k R^a_c ∧ ω^c_b`.
    pub fn d_endo(&self, r: &[Form]) -> Result<Vec<Form>> {
        let n = self.n();
        let odd = r[0].degree() % 2 == 1;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = r[a * n + b].d()?;
                for c in 0..n {
                    acc = acc + self.omega[a * n + c].wedge(&r[c * n + b]);
                    let t = r[a * n + c].wedge(&self.omega[c * n + b]);
                    acc = if odd { acc + t } else { acc - t };
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// `Dg_ab`, row-major.
    pub fn metric_differential(&self) -> Result<&[Form]> {
        cached!(self.dg, self.d_bilinear(&self.g_forms()))
    }

    /// `D²g_ab`.
    pub fn second_metric_differential(&self) -> Result<Vec<Form>> {
        self.d_bilinear(self.metric_differential()?)
    }

    /// Coordinate split `Dg_ab = X_abc dx^c + Y_abc dy^c` as jets.
    pub fn metric_differential_split(&self) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let n = self.n();
        let dg = self.metric_differential()?;
        let coef = |f: &Form, slot: usize| f.get(1 << slot).cloned().unwrap_or_else(|| self.geo.zero().clone());
        let mut x = Vec::with_capacity(n * n * n);
        let mut y = Vec::with_capacity(n * n * n);
        for ab in 0..n * n {
            for c in 0..n {
                x.push(coef(&dg[ab], c));
                y.push(coef(&dg[ab], n + c));
            }
        }
        Ok((x, y))
    }

    /// `Dg_ab = −2Λ_abc ω^c − 2Π_abc ω̄^c`.
    pub fn lambda_pi(&self) -> Result<(Tensor3, Tensor3)> {
        let n = self.n();
        let q = self.q_matrix()?;
        let ay = values(&ay_matrix(self.geo, &self.a));
        let (x, y) = self.metric_differential_split()?;
        let (x, y) = (values(&x), values(&y));
        let mut lambda = vec![0.0; n * n * n];
        let mut pi = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                let base = (a * n + b) * n;
                let beta: Vec<f64> = (0..n)
                    .map(|c| (0..n).map(|d| y[base + d] * q[d * n + c]).sum())
                    .collect();
                for d in 0..n {
                    let alpha = x[base + d] - (0..n).map(|c| beta[c] * ay[c * n + d]).sum::<f64>();
                    lambda[base + d] = -0.5 * alpha;
                    pi[base + d] = -0.5 * beta[d];
                }
            }
        }
        Ok((
            Tensor3::new(n, lambda, Symmetry::FirstTwo),
            Tensor3::new(n, pi, Symmetry::FirstTwo),
        ))
    }

    /// Horizontal torsion `T^a = Dω^a = ω^a_b ∧ dx^b`.
    pub fn torsion(&self) -> Result<&[Form]> {
        cached!(self.torsion, self.d_vector(&self.dx))
    }

    /// Vertical torsion `T̄^a = Dω̄^a`.
    pub fn vertical_torsion(&self) -> Result<&[Form]> {
        cached!(self.vtorsion, self.d_vector(&self.omega_bar))
    }

    /// `R^a_b = dω^a_b + ω^a_c ∧ ω^c_b`, row-major.
    pub fn curvature(&self) -> Result<&[Form]> {
        cached!(self.curvature, {
            let n = self.n();
            (0..n * n)
                .map(|ab| {
                    let (a, b) = (ab / n, ab % n);
                    let d = self.omega[ab].d()?;
                    Ok((0..n).fold(d, |acc, c| acc + self.omega[a * n + c].wedge(&self.omega[c * n + b])))
                })
                .collect()
        })
    }

    /// `(R·φ)^a = R^a_b ∧ φ^b`.
    pub fn curvature_wedge(&self, phi: &[Form]) -> Result<Vec<Form>> {
        let n = self.n();
        let r = self.curvature()?;
        Ok((0..n).map(|a| dot_wedge(&r[a * n..(a + 1) * n], phi)).collect())
    }

    pub fn bianchi_residuals(&self) -> Result<BianchiResiduals> {
        let dt = self.d_vector(self.torsion()?)?;
        let rw = self.curvature_wedge(&self.dx)?;
        let dtb = self.d_vector(self.vertical_torsion()?)?;
        let rwb = self.curvature_wedge(&self.omega_bar)?;
        let dr = self.d_endo(self.curvature()?)?;
        Ok(BianchiResiduals {
            first_horizontal: distance_all(&dt, &rw),
            first_vertical: distance_all(&dtb, &rwb),
            second: max_abs_all(&dr),
        })
    }

    /// `K^a_b = ½ g^{ar} Dg_rb`, row-major 1-forms.
    pub fn half_ginv_dg(&self) -> Result<Vec<Form>> {
        let n = self.n();
        let ginv = self.geo.ginv()?;
        let dg = self.metric_differential()?;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let col: Vec<Form> = (0..n).map(|r| dg[r * n + b].clone()).collect();
                out.push(contract(&ginv[a * n..(a + 1) * n], &col).scale(0.5));
            }
        }
        Ok(out)
    }

    /// Coordinate coefficients of `ω + ½ g⁻¹ Dg`.
    pub fn canonical_coefficients(&self) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let (x, y) = self.metric_differential_split()?;
        let rx = self.geo.raise_first(&x)?;
        let ry = self.geo.raise_first(&y)?;
        let a = self.a.iter().zip(&rx).map(|(p, q)| p + &q.scale(0.5)).collect();
        let b = self.b.iter().zip(&ry).map(|(p, q)| p + &q.scale(0.5)).collect();
        Ok((a, b))
    }

    /// Canonical horizontal and vertical torsions `(Ψ, Ψ̄)`.
    pub fn canonical_torsions(&self) -> Result<(Vec<Form>, Vec<Form>)> {
        let n = self.n();
        let k = self.half_ginv_dg()?;
        let t = self.torsion()?;
        let tb = self.vertical_torsion()?;
        let ky: Vec<Form> = (0..n)
            .map(|a| contract(&self.geo.vars()[n..], &k[a * n..(a + 1) * n]))
            .collect();
        let dky = self.d_vector(&ky)?;
        let mut psi = Vec::with_capacity(n);
        let mut psi_bar = Vec::with_capacity(n);
        for a in 0..n {
            let row = &k[a * n..(a + 1) * n];
            psi.push(&t[a] + &dot_wedge(row, &self.dx));
            psi_bar.push(&(&(&tb[a] + &dot_wedge(row, &self.omega_bar)) + &dky[a]) + &dot_wedge(row, &ky));
        }
        Ok((psi, psi_bar))
    }

    /// Lowered canonical curvature `R̃_ab = R_[ab] − ¼ Dg_ac ∧ g^{cs} Dg_sb`.
    pub fn canonical_curvature(&self) -> Result<Vec<Form>> {
        let n = self.n();
        let g = self.geo.g();
        let ginv = self.geo.ginv()?;
        let r = self.curvature()?;
        let dg = self.metric_differential()?;
        let low: Vec<Form> = (0..n * n)
            .map(|ab| {
                let (a, b) = (ab / n, ab % n);
                let col: Vec<Form> = (0..n).map(|c| r[c * n + b].clone()).collect();
                contract(&g[a * n..(a + 1) * n], &col)
            })
            .collect();
        // raised[c][b] = g^{cs} Dg_sb
        let raised: Vec<Form> = (0..n * n)
            .map(|cb| {
                let (c, b) = (cb / n, cb % n);
                let col: Vec<Form> = (0..n).map(|s| dg[s * n + b].clone()).collect();
                contract(&ginv[c * n..(c + 1) * n], &col)
            })
            .collect();
        Ok((0..n * n)
            .map(|ab| {
                let (a, b) = (ab / n, ab % n);
                let skew = (&low[ab] - &low[b * n + a]).scale(0.5);
                let col: Vec<Form> = (0..n).map(|c| raised[c * n + b].clone()).collect();
                skew - dot_wedge(&dg[a * n..(a + 1) * n], &col).scale(0.25)
            })
            .collect())
    }

    /// `g·φ` for a `TM`-valued form: `(g·φ)_a = g_ab φ^b`.
    pub fn lower(&self, phi: &[Form]) -> Vec<Form> {
        let n = self.n();
        let g = self.geo.g();
        (0..n).map(|a| contract(&g[a * n..(a + 1) * n], phi)).collect()
    }

    /// `y·g·φ = y^a g_ab φ^b`.
    pub fn y_g(&self, phi: &[Form]) -> Form {
        let n = self.n();
        contract(&self.geo.vars()[n..], &self.lower(phi))
    }

    /// `y·Φ = y^a Φ_ab` for a form with two lower indices.
    pub fn y_dot(&self, phi: &[Form]) -> Vec<Form> {
        let n = self.n();
        (0..n)
            .map(|b| {
                let col: Vec<Form> = (0..n).map(|a| phi[a * n + b].clone()).collect();
                contract(&self.geo.vars()[n..], &col)
            })
            .collect()
    }

    pub fn omega_2form(&self) -> OmegaForm {
        let n = self.n();
        let dim = self.dim();
        let form = dot_wedge(&self.omega_bar, &self.lower(&self.dx));
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i + 1..dim {
                let v = form.value((1 << i) | (1 << j));
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        let ratio = singular_ratio(&m);
        let _ = n;
        OmegaForm {
            form,
            det: m.determinant(),
            singular_ratio: ratio,
            nondegenerate: ratio > REGULARITY_RATIO,
            matrix: m,
        }
    }

    /// `(dΩ − [Ψ̄·∧(g·ω) − Ψ·∧(g·ω̄)], same with Ψ̄ truncated to
    /// T̄ + ½g⁻¹Dg∧ω̄)`. The truncated form holds for every connection; the
    /// full one needs `y·Dg = 0`.
    pub fn omega_differential_residuals(&self) -> Result<(f64, f64)> {
        let n = self.n();
        let d_omega = self.omega_2form().form.d()?;
        let (psi, psi_bar) = self.canonical_torsions()?;
        let g_dx = self.lower(&self.dx);
        let g_bar = self.lower(&self.omega_bar);
        let k = self.half_ginv_dg()?;
        let tb = self.vertical_torsion()?;
        let trunc: Vec<Form> = (0..n)
            .map(|a| &tb[a] + &dot_wedge(&k[a * n..(a + 1) * n], &self.omega_bar))
            .collect();
        let rhs_full = dot_wedge(&psi_bar, &g_dx) - dot_wedge(&psi, &g_bar);
        let rhs_trunc = dot_wedge(&trunc, &g_dx) - dot_wedge(&psi, &g_bar);
        Ok((d_omega.distance(&rhs_full), d_omega.distance(&rhs_trunc)))
    }
}

/// Hilbert form `y^a g_ab dx^b`.
pub fn hilbert_form(geo: &PointGeometry) -> Form {
    let n = geo.n();
    let one = geo.constant(1.0);
    let g = geo.g();
    let dim = 2 * n;
    let mut out = Form::zero(dim, 1, geo.context().order());
    for b in 0..n {
        let c = jet_sum(geo.zero(), (0..n).map(|a| geo.y(a) * &g[a * n + b]));
        out = out + Form::monomial(dim, &[b], one.clone()).mul_fn(&c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, BuiltinFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(x: &[f64], y: &[f64]) -> BasePoint {
        BasePoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn randers() -> LagrangianSpec {
        BuiltinFamily::randers_rotational(2, 0.3).build().unwrap()
    }

    fn p0() -> BasePoint {
        pt(&[0.3, -0.5], &[0.8, 0.45])
    }

    #[test]
    fn euclidean_chern_is_flat() {
        let spec = BuiltinFamily::euclidean(2).build().unwrap();
        let geo = PointGeometry::new(&spec, &pt(&[0.1, 0.2], &[3.0, 4.0]), 4).unwrap();
        let c = FinslerConnection::catalogue(ConnectionKind::Chern).at(&geo).unwrap();
        assert!(max_abs_all(c.omega()) == 0.0);
        assert!(c.omega_bar()[0].value(0b100) == 1.0 && c.omega_bar()[0].terms().len() == 1);
        assert!(max_abs_all(c.curvature().unwrap()) == 0.0);
        assert!(max_abs_all(c.vertical_torsion().unwrap()) == 0.0);
        let om = c.omega_2form();
        assert!((om.det - 1.0).abs() < 1e-15);
        // Ω = Σ dy^a ∧ dx^a
        assert_eq!(om.form.value(0b0101), -1.0);
        let theta = hilbert_form(&geo);
        assert_eq!(theta.value(0b01), 3.0);
        assert_eq!(theta.value(0b10), 4.0);
    }

    #[test]
    fn catalogue_metric_differentials() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 6).unwrap();
        let cart = geo.cartan_tensor().unwrap();
        let lands = geo.landsberg_tensor().unwrap();
        let neg_c = Tensor3::new(2, cart.data.iter().map(|v| -v).collect(), Symmetry::None);
        for kind in ConnectionKind::ALL {
            let c = FinslerConnection::catalogue(kind).at(&geo).unwrap();
            assert!(c.is_regular());
            assert!(c.is_strongly_regular().unwrap(), "{kind}");
            let (lambda, pi) = c.lambda_pi().unwrap();
            let zero = Tensor3::zeros(2, Symmetry::None);
            let (el, ep) = match kind {
                ConnectionKind::Chern => (&zero, &neg_c),
                ConnectionKind::Berwald => (&lands, &neg_c),
                ConnectionKind::Cartan => (&zero, &zero),
                ConnectionKind::Hashiguchi => (&lands, &zero),
            };
            assert!(lambda.distance(el) < 1e-8, "{kind} Λ {}", lambda.distance(el));
            assert!(pi.distance(ep) < 1e-8, "{kind} Π {}", pi.distance(ep));
        }
    }

    #[test]
    fn torsions_and_bianchi() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 6).unwrap();
        let chern = FinslerConnection::catalogue(ConnectionKind::Chern).at(&geo).unwrap();
        assert!(max_abs_all(chern.torsion().unwrap()) < 1e-9);
        let cartan = FinslerConnection::catalogue(ConnectionKind::Cartan).at(&geo).unwrap();
        assert!(max_abs_all(cartan.torsion().unwrap()) > 1e-3);
        for c in [&chern, &cartan] {
            let b = c.bianchi_residuals().unwrap();
            assert!(
                b.first_horizontal < 1e-8 && b.first_vertical < 1e-8 && b.second < 1e-8,
                "{b:?}"
            );
            // T̄ = R(y)
            let r = c.curvature().unwrap();
            for a in 0..2 {
                let ry = contract(&geo.vars()[2..], &r[a * 2..a * 2 + 2]);
                assert!(ry.distance(&c.vertical_torsion().unwrap()[a]) < 1e-9);
            }
            // D(Dy) = R(y), with Dy = ω̄ built independently from d(y)
            let y_forms: Vec<Form> = (0..2).map(|a| Form::function(4, geo.y(a).clone())).collect();
            let dy = c.d_vector(&y_forms).unwrap();
            assert!(distance_all(&dy, c.omega_bar()) < 1e-14);
        }
    }

    #[test]
    fn hv_round_trip_and_q() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 5).unwrap();
        let h = TensorField::Expressions(
            ["x1*y2", "0", "1", "y1", "0", "x2", "0", "0"]
                .iter()
                .map(|t| parse(t, 2).unwrap())
                .collect(),
        );
        // V^a_bc = ½ y^a δ_bc / |y|²: regular, not strongly regular
        let v = TensorField::Expressions(
            (0..8)
                .map(|k| {
                    let (a, b, c) = (k / 4, (k / 2) % 2, k % 2);
                    let t = if b == c {
                        format!("0.5*y{}/(y1^2+y2^2)", a + 1)
                    } else {
                        "0".into()
                    };
                    parse(&t, 2).unwrap()
                })
                .collect(),
        );
        let conn = FinslerConnection::custom("c", h.clone(), v.clone(), VBasis::Bar);
        let at = conn.at(&geo).unwrap();
        assert!(at.is_regular());
        assert!(!at.is_strongly_regular().unwrap());
        let hv = at.hv().unwrap();
        let hj = h.jets(&geo).unwrap().unwrap();
        let vj = v.jets(&geo).unwrap().unwrap();
        assert!(crate::geometry::max_diff(&values(&hv.h), &values(&hj)) < 1e-12);
        assert!(crate::geometry::max_diff(&values(&hv.v), &values(&vj)) < 1e-12);
        let q = at.q_matrix().unwrap();
        assert!((q[0] - 1.0).abs() > 1e-3);
        // ω̃ = Q ω̄ with ω̃ = dy + N dx
        let nl = values(&hv.nonlinear);
        for a in 0..2 {
            let lhs: Vec<f64> = (0..4)
                .map(|k| (0..2).map(|b| q[a * 2 + b] * at.omega_bar()[b].value(1 << k)).sum())
                .collect();
            assert!((lhs[2 + a] - 1.0).abs() < 1e-12 && lhs[2 + (1 - a)].abs() < 1e-12);
            for c in 0..2 {
                assert!((lhs[c] - nl[a * 2 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_regular_coordinate_connection() {
        let spec = BuiltinFamily::euclidean(2).build().unwrap();
        let geo = PointGeometry::new(&spec, &p0(), 4).unwrap();
        // B^a_bc = −y^a δ_bc / |y|² makes P singular along y
        let b = TensorField::Expressions(
            (0..8)
                .map(|k| {
                    let (a, bb, c) = (k / 4, (k / 2) % 2, k % 2);
                    let t = if bb == c {
                        format!("-y{}/(y1^2+y2^2)", a + 1)
                    } else {
                        "0".into()
                    };
                    parse(&t, 2).unwrap()
                })
                .collect(),
        );
        let at = FinslerConnection::coordinate("sing", TensorField::Zero, b)
            .at(&geo)
            .unwrap();
        assert!(!at.is_regular());
        assert!(matches!(at.hv(), Err(Error::NotRegular(_))));
        assert!(!at.omega_2form().nondegenerate);
    }

    #[test]
    fn canonical_objects_match_canonical_connection() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 6).unwrap();
        let base = FinslerConnection::catalogue(ConnectionKind::Berwald);
        let at = base.at(&geo).unwrap();
        let can = base.canonical_metric().at(&geo).unwrap();
        assert!(max_abs_all(can.metric_differential().unwrap()) < 1e-9);
        let (psi, psi_bar) = at.canonical_torsions().unwrap();
        assert!(distance_all(&psi, can.torsion().unwrap()) < 1e-9);
        assert!(distance_all(&psi_bar, can.vertical_torsion().unwrap()) < 1e-9);
        let rt = at.canonical_curvature().unwrap();
        let n = 2;
        let rc = can.curvature().unwrap();
        let low: Vec<Form> = (0..n * n)
            .map(|ab| {
                let (a, b) = (ab / n, ab % n);
                let col: Vec<Form> = (0..n).map(|c| rc[c * n + b].clone()).collect();
                contract(&geo.g()[a * n..(a + 1) * n], &col)
            })
            .collect();
        assert!(distance_all(&rt, &low) < 1e-8);
        let cartan = FinslerConnection::catalogue(ConnectionKind::Cartan).at(&geo).unwrap();
        assert!(crate::geometry::max_diff(&values(can.a()), &values(cartan.a())) < 1e-9);
        assert!(crate::geometry::max_diff(&values(can.b()), &values(cartan.b())) < 1e-9);
    }

    #[test]
    fn symmetry_preserves_omega_bar() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = SymmetryW::random(2, &mut rng, 0.5, false);
        validate_w(&w, &spec, &[p0()], 4).unwrap();
        let chern = FinslerConnection::catalogue(ConnectionKind::Chern);
        let moved = apply_symmetry(&chern, &w);
        let a0 = chern.at(&geo).unwrap();
        let a1 = moved.at(&geo).unwrap();
        assert!(distance_all(a0.omega_bar(), a1.omega_bar()) < 1e-12);
        assert!(max_abs_all(a1.torsion().unwrap()) > 1e-3);
        let (_, pb0) = a0.canonical_torsions().unwrap();
        let (_, pb1) = a1.canonical_torsions().unwrap();
        assert!(distance_all(&pb0, &pb1) < 1e-9);
        let amp = SymmetryW::random(2, &mut rng, 0.5, true);
        assert!(validate_w(
            &SymmetryW {
                amplified: false,
                ..amp.clone()
            },
            &spec,
            &[p0()],
            4
        )
        .is_err());
        validate_w(&amp, &spec, &[p0()], 4).unwrap();
    }

    #[test]
    fn omega_differential_truncated_holds_generally() {
        let spec = randers();
        let geo = PointGeometry::new(&spec, &p0(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amp = SymmetryW::random(2, &mut rng, 0.5, true);
        let conn = apply_symmetry(&FinslerConnection::catalogue(ConnectionKind::Cartan), &amp);
        let at = conn.at(&geo).unwrap();
        let (_, trunc) = at.omega_differential_residuals().unwrap();
        assert!(trunc < 1e-9, "{trunc}");
        let cartan = FinslerConnection::catalogue(ConnectionKind::Cartan).at(&geo).unwrap();
        let (full, _) = cartan.omega_differential_residuals().unwrap();
        assert!(full < 1e-9);
    }
}
