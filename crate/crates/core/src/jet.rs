//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function of `nvars`
//! variables about a fixed base point, truncated at total degree `order`.
//! Coefficients live in a dense array indexed by the *graded rank* of the
//! monomial exponent vector:
//!
//! * monomials are grouped by total degree, degree 0 first;
//! * inside one degree they are ordered lexicographically with the first
//!   exponent **descending**, so for two variables and degree 2 the order is
//!   `(2,0), (1,1), (0,2)`.
//!
//! [`JetSpace::rank`] computes that position combinatorially and
//! [`JetSpace::monomial`] inverts it. Because the ordering is graded, the
//! coefficients of a jet of order `r` are exactly the first
//! `C(nvars + r, r)` entries, which is what makes truncation free.
//!
//! Every arithmetic operation is exact to the truncation order: products use
//! a precomputed multiplication table, quotients, square roots and real
//! powers use coefficient recurrences that keep the value part bit-identical
//! to plain `f64` evaluation.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default truncation order for first-layer tensors.
pub const DEFAULT_ORDER: usize = 5;

/// Value parts with magnitude below this are treated as zero by `/`, `sqrt`
/// and `powf`.
pub const DEGENERACY_FLOOR: f64 = 1e-200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("derivative of order {requested} requested but jet only carries order {available}")]
    OrderOverflow { requested: usize, available: usize },
    #[error("numeric degeneracy in {op}: value part {value:e}")]
    NumericDegeneracy { op: &'static str, value: f64 },
    #[error("multi-index has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("base point is not on the slit tangent bundle (y = 0)")]
    ZeroFiber,
}

/// Exponent vector of a monomial; the first half of the slots are the `x`
/// directions and the second half the `y` directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u8>);

impl MultiIndex {
    pub fn zero(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    /// Unit multi-index in slot `i`.
    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        MultiIndex(e)
    }

    /// Multi-index built from a list of slots, each occurrence adding one.
    /// `from_slots(4, &[2, 2, 0])` is `(1, 0, 2, 0)`.
    pub fn from_slots(nvars: usize, slots: &[usize]) -> Self {
        let mut e = vec![0u8; nvars];
        for &s in slots {
            e[s] += 1;
        }
        MultiIndex(e)
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Product of the factorials of the exponents.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of exponent vectors with `slots` entries summing to `total`.
fn compositions(total: usize, slots: usize) -> usize {
    if slots == 0 {
        return usize::from(total == 0);
    }
    binomial(total + slots - 1, slots - 1)
}

/// Monomial layout and multiplication table shared by all jets with the same
/// variable count and maximal order.
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    monomials: Vec<Vec<u8>>,
    degrees: Vec<u8>,
    /// `degree_start[d]` is the rank of the first monomial of degree `d`.
    degree_start: Vec<usize>,
    /// `(i, j, k)` with `m_i + m_j = m_k`, sorted by `k`.
    mul_table: Vec<(u32, u32, u32)>,
    /// `mul_end[r]` is the number of table entries with result degree <= r.
    mul_end: Vec<usize>,
    /// Table entries with result `k` live in `group[k]..group[k + 1]`.
    group: Vec<usize>,
    /// `shift[v][k]` is the rank of `m_k + e_v`, or `u32::MAX` if too deep.
    shift: Vec<Vec<u32>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("max_order", &self.max_order)
            .field("monomials", &self.monomials.len())
            .finish()
    }
}

impl JetSpace {
    pub fn new(nvars: usize, max_order: usize) -> Self {
        assert!(nvars > 0, "jet space needs at least one variable");
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(max_order + 2);
        for d in 0..=max_order {
            degree_start.push(monomials.len());
            let mut buf = vec![0u8; nvars];
            push_compositions(d, 0, &mut buf, &mut monomials);
        }
        degree_start.push(monomials.len());
        let degrees: Vec<u8> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum::<usize>() as u8)
            .collect();

        let mut space = JetSpace {
            nvars,
            max_order,
            monomials,
            degrees,
            degree_start,
            mul_table: Vec::new(),
            mul_end: Vec::new(),
            group: Vec::new(),
            shift: Vec::new(),
        };

        let count = space.monomials.len();
        let mut table = Vec::new();
        let mut sum = vec![0u8; nvars];
        for i in 0..count {
            let di = space.degrees[i] as usize;
            let jmax = space.degree_start[max_order - di + 1];
            for j in 0..jmax {
                for (v, s) in sum.iter_mut().enumerate() {
                    *s = space.monomials[i][v] + space.monomials[j][v];
                }
                let k = space.rank(&sum).expect("degree bounded by construction");
                table.push((i as u32, j as u32, k as u32));
            }
        }
        table.sort_unstable_by_key(|&(i, j, k)| (k, i, j));

        let mut group = vec![0usize; count + 1];
        for &(_, _, k) in &table {
            group[k as usize + 1] += 1;
        }
        for k in 0..count {
            group[k + 1] += group[k];
        }
        let mul_end = (0..=max_order).map(|r| group[space.degree_start[r + 1]]).collect();

        let mut shift = vec![vec![u32::MAX; count]; nvars];
        for (v, row) in shift.iter_mut().enumerate() {
            for (k, slot) in row.iter_mut().enumerate() {
                if (space.degrees[k] as usize) < max_order {
                    let mut m = space.monomials[k].clone();
                    m[v] += 1;
                    *slot = space.rank(&m).expect("bounded") as u32;
                }
            }
        }

        space.mul_table = table;
        space.mul_end = mul_end;
        space.group = group;
        space.shift = shift;
        space
    }

    /// Process-wide cached space for `(nvars, max_order)`.
    pub fn shared(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((nvars, max_order))
            .or_insert_with(|| Arc::new(JetSpace::new(nvars, max_order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of monomials of degree at most `order`.
    pub fn count(&self, order: usize) -> usize {
        self.degree_start[order.min(self.max_order) + 1]
    }

    pub fn monomial(&self, rank: usize) -> &[u8] {
        &self.monomials[rank]
    }

    /// Graded rank of an exponent vector, `None` if its degree exceeds the
    /// space's maximal order or the length is wrong.
    pub fn rank(&self, exps: &[u8]) -> Option<usize> {
        if exps.len() != self.nvars {
            return None;
        }
        let degree: usize = exps.iter().map(|&e| e as usize).sum();
        if degree > self.max_order {
            return None;
        }
        let mut r = self.degree_start[degree];
        let mut remaining = degree;
        for (pos, &e) in exps.iter().enumerate().take(self.nvars - 1) {
            let e = e as usize;
            let rest = self.nvars - pos - 1;
            for bigger in (e + 1)..=remaining {
                r += compositions(remaining - bigger, rest);
            }
            remaining -= e;
        }
        Some(r)
    }
}

fn push_compositions(remaining: usize, pos: usize, buf: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining as u8;
        out.push(buf.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e as u8;
        push_compositions(remaining - e, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

/// Truncated Taylor expansion of a scalar about the base point of its
/// [`JetContext`]. Coefficients are derivatives divided by the multi-index
/// factorial.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(order {}, value {:e})", self.order, self.value())
    }
}

impl Jet {
    /// Constant function; carries the maximal order since it is exact.
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Jet {
        let order = space.max_order;
        let mut coeffs = vec![0.0; space.count(order)];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet::constant(space, 0.0)
    }

    fn zeros_like(&self, order: usize) -> Jet {
        Jet {
            space: self.space.clone(),
            order,
            coeffs: vec![0.0; self.space.count(order)],
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Stored Taylor coefficient for `m`.
    pub fn coefficient(&self, m: &MultiIndex) -> Result<f64, JetError> {
        if m.0.len() != self.space.nvars {
            return Err(JetError::DimensionMismatch {
                expected: self.space.nvars,
                got: m.0.len(),
            });
        }
        let order = m.order();
        if order > self.order {
            return Err(JetError::OrderOverflow {
                requested: order,
                available: self.order,
            });
        }
        let r = self.space.rank(&m.0).expect("order checked");
        Ok(self.coeffs[r])
    }

    /// Partial derivative `∂^m f` at the base point.
    pub fn derivative(&self, m: &MultiIndex) -> Result<f64, JetError> {
        Ok(self.coefficient(m)? * m.factorial())
    }

    /// Jet of the partial derivative in variable `var`, one order shorter.
    pub fn partial(&self, var: usize) -> Result<Jet, JetError> {
        if var >= self.space.nvars {
            return Err(JetError::IndexOutOfRange {
                index: var,
                nvars: self.space.nvars,
            });
        }
        if self.order == 0 {
            return Err(JetError::OrderOverflow {
                requested: 1,
                available: 0,
            });
        }
        let order = self.order - 1;
        let mut out = self.zeros_like(order);
        let shift = &self.space.shift[var];
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let up = shift[k] as usize;
            let e = self.space.monomials[k][var] as f64 + 1.0;
            *c = e * self.coeffs[up];
        }
        Ok(out)
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.count(order)].to_vec(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn check_space(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.space, &other.space)
                || (self.space.nvars == other.space.nvars && self.space.max_order == other.space.max_order),
            "jets from different spaces"
        );
    }

    fn combine(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.check_space(other);
        let order = self.order.min(other.order);
        let len = self.space.count(order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..len]
                .iter()
                .zip(&other.coeffs[..len])
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mul_ref(&self, other: &Jet) -> Jet {
        self.check_space(other);
        let order = self.order.min(other.order);
        let mut out = self.zeros_like(order);
        if self.is_zero() || other.is_zero() {
            return out;
        }
        let a = &self.coeffs;
        let b = &other.coeffs;
        let c = &mut out.coeffs;
        for &(i, j, k) in &self.space.mul_table[..self.space.mul_end[order]] {
            c[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    /// `self / other`, value part computed as a plain `f64` quotient.
    pub fn div_ref(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_space(other);
        let b0 = other.value();
        if !(b0.abs() > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy { op: "div", value: b0 });
        }
        let order = self.order.min(other.order);
        let mut out = self.zeros_like(order);
        let sp = &self.space;
        for k in 0..out.coeffs.len() {
            let mut acc = self.coeffs[k];
            for &(i, j, _) in &sp.mul_table[sp.group[k]..sp.group[k + 1]] {
                if j != 0 {
                    acc -= out.coeffs[i as usize] * other.coeffs[j as usize];
                }
            }
            out.coeffs[k] = if k == 0 { self.coeffs[0] / b0 } else { acc / b0 };
        }
        Ok(out)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if !(a0 > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy { op: "sqrt", value: a0 });
        }
        let mut out = self.zeros_like(self.order);
        let c0 = a0.sqrt();
        out.coeffs[0] = c0;
        let sp = &self.space;
        for k in 1..out.coeffs.len() {
            let mut acc = self.coeffs[k];
            for &(i, j, _) in &sp.mul_table[sp.group[k]..sp.group[k + 1]] {
                if i != 0 && j != 0 {
                    acc -= out.coeffs[i as usize] * out.coeffs[j as usize];
                }
            }
            out.coeffs[k] = acc / (2.0 * c0);
        }
        Ok(out)
    }

    /// Real power with a strictly positive value part.
    ///
    /// Uses the Euler-operator recurrence `a·E(c) = p·c·E(a)` where `E`
    /// multiplies each homogeneous component by its degree.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let a0 = self.value();
        if !(a0 > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy { op: "powf", value: a0 });
        }
        let mut out = self.zeros_like(self.order);
        out.coeffs[0] = a0.powf(p);
        let sp = &self.space;
        for k in 1..out.coeffs.len() {
            let dk = sp.degrees[k] as f64;
            let mut acc = 0.0;
            for &(i, j, _) in &sp.mul_table[sp.group[k]..sp.group[k + 1]] {
                if j != 0 {
                    let di = sp.degrees[i as usize] as f64;
                    let dj = sp.degrees[j as usize] as f64;
                    acc += (p * dj - di) * out.coeffs[i as usize] * self.coeffs[j as usize];
                }
            }
            out.coeffs[k] = acc / (dk * a0);
        }
        Ok(out)
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        Jet::constant(&self.space, 1.0).div_ref(self)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.combine(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.combine(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// The differentiable-scalar contract: anything the expression evaluator and
/// the small linear-algebra helpers can run on.
///
/// `try_powi` has a default square-and-multiply body on purpose: `f64` and
/// [`Jet`] share it, so the value part of a jet evaluation is bit-identical to
/// the plain evaluation.
pub trait Scalar:
    Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn value(&self) -> f64;
    /// Constant `c` living in the same context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn try_div(&self, rhs: &Self) -> Result<Self, JetError>;
    fn try_sqrt(&self) -> Result<Self, JetError>;
    fn try_powf(&self, p: f64) -> Result<Self, JetError>;

    fn try_powi(&self, n: i32) -> Result<Self, JetError> {
        if n == 0 {
            return Ok(self.lift(1.0));
        }
        let mut base = self.clone();
        let mut e = n.unsigned_abs();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a * base.clone(),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        let p = acc.expect("n != 0");
        if n < 0 {
            self.lift(1.0).try_div(&p)
        } else {
            Ok(p)
        }
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn try_div(&self, rhs: &Self) -> Result<Self, JetError> {
        if !(rhs.abs() > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy { op: "div", value: *rhs });
        }
        Ok(self / rhs)
    }
    fn try_sqrt(&self) -> Result<Self, JetError> {
        if !(*self > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy {
                op: "sqrt",
                value: *self,
            });
        }
        Ok(self.sqrt())
    }
    fn try_powf(&self, p: f64) -> Result<Self, JetError> {
        if !(*self > DEGENERACY_FLOOR) {
            return Err(JetError::NumericDegeneracy {
                op: "powf",
                value: *self,
            });
        }
        Ok(self.powf(p))
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn lift(&self, c: f64) -> Self {
        Jet::constant(&self.space, c)
    }
    fn try_div(&self, rhs: &Self) -> Result<Self, JetError> {
        self.div_ref(rhs)
    }
    fn try_sqrt(&self) -> Result<Self, JetError> {
        self.sqrt()
    }
    fn try_powf(&self, p: f64) -> Result<Self, JetError> {
        self.powf(p)
    }
}

/// Base point on the slit tangent bundle plus the jet space used to expand
/// functions about it.
#[derive(Debug, Clone)]
pub struct JetContext {
    space: Arc<JetSpace>,
    base: Vec<f64>,
}

impl JetContext {
    /// `base` holds `(x, y)` with `2n` entries; `y` must be nonzero.
    pub fn new(base: Vec<f64>, order: usize) -> Result<Self, JetError> {
        let nvars = base.len();
        if nvars == 0 || !nvars.is_multiple_of(2) {
            return Err(JetError::DimensionMismatch {
                expected: 2 * (nvars / 2).max(1),
                got: nvars,
            });
        }
        if base[nvars / 2..].iter().all(|&v| v == 0.0) {
            return Err(JetError::ZeroFiber);
        }
        Ok(JetContext {
            space: JetSpace::shared(nvars, order),
            base,
        })
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn nvars(&self) -> usize {
        self.base.len()
    }

    pub fn order(&self) -> usize {
        self.space.max_order
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    pub fn constant(&self, c: f64) -> Jet {
        Jet::constant(&self.space, c)
    }

    /// Jet of the `i`-th coordinate function.
    pub fn seed(&self, i: usize) -> Result<Jet, JetError> {
        if i >= self.base.len() {
            return Err(JetError::IndexOutOfRange {
                index: i,
                nvars: self.base.len(),
            });
        }
        let mut j = Jet::constant(&self.space, self.base[i]);
        if self.space.max_order >= 1 {
            j.coeffs[1 + i] = 1.0;
        }
        Ok(j)
    }

    pub fn seed_all(&self) -> Vec<Jet> {
        (0..self.base.len())
            .map(|i| self.seed(i).expect("index in range"))
            .collect()
    }
}

/// Inverse of a dense `n×n` matrix (row-major) with partial pivoting on the
/// value parts. Returns the inverse and the determinant's value.
pub fn invert_matrix<S: Scalar>(m: &[S], n: usize) -> Result<(Vec<S>, f64), JetError> {
    assert_eq!(m.len(), n * n);
    let one = m[0].lift(1.0);
    let zero = m[0].lift(0.0);
    let mut a: Vec<S> = m.to_vec();
    let mut inv: Vec<S> = (0..n * n)
        .map(|k| if k / n == k % n { one.clone() } else { zero.clone() })
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1 * n + col].value().abs().total_cmp(&a[r2 * n + col].value().abs()))
            .expect("non-empty range");
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col].clone();
        det *= p.value();
        for k in 0..n {
            a[col * n + k] = a[col * n + k].try_div(&p)?;
            inv[col * n + k] = inv[col * n + k].try_div(&p)?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            for k in 0..n {
                let ak = a[col * n + k].clone();
                let ik = inv[col * n + k].clone();
                a[r * n + k] = a[r * n + k].clone() - f.clone() * ak;
                inv[r * n + k] = inv[r * n + k].clone() - f.clone() * ik;
            }
        }
    }
    Ok((inv, det))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(base: Vec<f64>, order: usize) -> JetContext {
        JetContext::new(base, order).unwrap()
    }

    #[test]
    fn rank_inverts_enumeration() {
        for (nvars, order) in [(2, 5), (4, 4), (6, 3), (3, 6)] {
            let sp = JetSpace::new(nvars, order);
            assert_eq!(sp.count(order), binomial(nvars + order, order));
            for k in 0..sp.count(order) {
                assert_eq!(sp.rank(sp.monomial(k)), Some(k));
            }
        }
    }

    #[test]
    fn rank_layout_is_graded_first_exponent_descending() {
        let sp = JetSpace::new(2, 2);
        let order: Vec<&[u8]> = (0..6).map(|k| sp.monomial(k)).collect();
        assert_eq!(order, vec![&[0, 0][..], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]);
        assert_eq!(sp.rank(&[3, 0]), None);
        assert_eq!(sp.rank(&[1]), None);
    }

    #[test]
    fn seed_is_coordinate_function() {
        let c = ctx(vec![3.0, 1.0], 2);
        let u = c.seed(0).unwrap();
        assert_eq!(u.value(), 3.0);
        assert_eq!(u.derivative(&MultiIndex(vec![1, 0])).unwrap(), 1.0);
        assert_eq!(u.derivative(&MultiIndex(vec![0, 1])).unwrap(), 0.0);
        assert_eq!(u.derivative(&MultiIndex(vec![1, 1])).unwrap(), 0.0);
        assert_eq!(u.derivative(&MultiIndex(vec![0, 0])).unwrap(), 3.0);
        assert!(matches!(
            c.seed(2),
            Err(JetError::IndexOutOfRange { index: 2, nvars: 2 })
        ));
    }

    #[test]
    fn square_second_derivative() {
        let c = ctx(vec![3.0, 1.0], 2);
        let u = c.seed(0).unwrap();
        let sq = &u * &u;
        assert_eq!(sq.derivative(&MultiIndex(vec![2, 0])).unwrap(), 2.0);
        assert_eq!(sq.value(), 9.0);
    }

    #[test]
    fn constants_have_no_higher_terms() {
        let c = ctx(vec![0.5, -1.0, 2.0, 1.0], 4);
        let k = c.constant(2.5);
        assert_eq!(k.value(), 2.5);
        assert!(k.coefficients()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_mixed_partial() {
        let c = ctx(vec![0.3, 0.7], 3);
        let f = c.seed(0).unwrap() * c.seed(1).unwrap();
        assert_eq!(f.derivative(&MultiIndex(vec![1, 1])).unwrap(), 1.0);
    }

    #[test]
    fn square_of_fiber_coordinate() {
        let c = ctx(vec![0.0, 1.5], 3);
        let y = c.seed(1).unwrap();
        let f = &y * &y;
        assert_eq!(f.derivative(&MultiIndex(vec![0, 2])).unwrap(), 2.0);
    }

    #[test]
    fn order_overflow_is_reported() {
        let c = ctx(vec![0.0, 1.0], 2);
        let y = c.seed(1).unwrap();
        assert!(matches!(
            y.derivative(&MultiIndex(vec![0, 3])),
            Err(JetError::OrderOverflow {
                requested: 3,
                available: 2
            })
        ));
        let d = y.partial(1).unwrap().partial(1).unwrap();
        assert_eq!(d.order(), 0);
        assert!(d.partial(0).is_err());
    }

    #[test]
    fn degeneracies_raise() {
        let c = ctx(vec![0.0, 1.0], 2);
        let x = c.seed(0).unwrap();
        assert!(matches!(
            c.constant(1.0).div_ref(&x),
            Err(JetError::NumericDegeneracy { op: "div", .. })
        ));
        assert!(x.sqrt().is_err());
        assert!((-c.seed(1).unwrap()).powf(0.5).is_err());
        assert!(JetContext::new(vec![1.0, 0.0], 2).is_err());
    }

    #[test]
    fn quotient_and_root_satisfy_defining_identities() {
        let c = ctx(vec![0.4, -0.2, 1.1, 0.6], 5);
        let v = c.seed_all();
        let a = &(&v[0] * &v[2]) + &c.constant(2.0);
        let b = &(&v[1] * &v[3]) + &(&v[2] * &v[2]);
        let q = a.div_ref(&b).unwrap();
        let back = &q * &b;
        for (x, y) in back.coefficients().iter().zip(a.coefficients()) {
            assert!((x - y).abs() < 1e-13);
        }
        let r = b.sqrt().unwrap();
        let sq = &r * &r;
        for (x, y) in sq.coefficients().iter().zip(b.coefficients()) {
            assert!((x - y).abs() < 1e-13);
        }
        let p = b.powf(1.5).unwrap();
        let p2 = &r * &b;
        for (x, y) in p.coefficients().iter().zip(p2.coefficients()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_commutes() {
        let c = ctx(vec![0.4, -0.2, 1.1, 0.6], 4);
        let v = c.seed_all();
        let f = (&(&v[0] * &v[3]) + &c.constant(1.0)).powf(-0.5).unwrap() * v[1].clone();
        let a = f.partial(0).unwrap().partial(3).unwrap();
        let b = f.partial(3).unwrap().partial(0).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        let direct = f.derivative(&MultiIndex(vec![1, 0, 0, 1])).unwrap();
        assert!((a.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn powi_shadow_matches_f64() {
        let c = ctx(vec![1.3, 0.7], 3);
        let x = c.seed(0).unwrap();
        for n in [-3, -1, 0, 1, 2, 5, 7] {
            let j = x.try_powi(n).unwrap();
            assert_eq!(j.value(), 1.3f64.try_powi(n).unwrap());
        }
    }

    #[test]
    fn matrix_inverse() {
        let (inv, det) = invert_matrix(&[1.0, 0.0, 0.0, 4.0], 2).unwrap();
        assert_eq!(inv, vec![1.0, 0.0, 0.0, 0.25]);
        assert_eq!(det, 4.0);
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let (inv, _) = invert_matrix(&m, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
