//! Differential forms on the slit tangent bundle with jet coefficients.
//!
//! A [`Form`] of degree `p` is a sparse sum `Σ f_I e^I` over increasing
//! multi-indices `I`, stored as bitmasks over the `2n` coordinate one-forms
//! `dx¹..dxⁿ, dy¹..dyⁿ` (bit `k` is slot `k`). Coefficients are jets about
//! the base point, so [`Form::d`] is exact up to the jet order. The form
//! tracks the lowest order of anything folded into it; zero coefficients are
//! dropped but the order still bounds how many more derivatives are allowed.

use std::ops::{Add, Neg, Sub};

use crate::jet::{invert_matrix, Jet, JetError};

#[derive(Debug, Clone)]
pub struct Form {
    dim: usize,
    degree: usize,
    order: usize,
    terms: Vec<(u32, Jet)>,
}

/// Sign of moving the one-forms of `b` past those of `a` into increasing
/// order, assuming `a & b == 0`.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let k = rest.trailing_zeros();
        swaps += (a >> (k + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Form {
    pub fn zero(dim: usize, degree: usize, order: usize) -> Self {
        assert!(dim <= 32, "at most 32 coordinates");
        Form {
            dim,
            degree,
            order,
            terms: Vec::new(),
        }
    }

    pub fn function(dim: usize, f: Jet) -> Self {
        let mut out = Form::zero(dim, 0, f.order());
        out.push(0, f);
        out
    }

    /// `Σ c_k e^k` for `coeffs.len() == dim`.
    pub fn one_form(coeffs: &[Jet]) -> Self {
        let dim = coeffs.len();
        let order = coeffs.iter().map(Jet::order).min().unwrap_or(0);
        let mut out = Form::zero(dim, 1, order);
        for (k, c) in coeffs.iter().enumerate() {
            out.push(1 << k, c.clone());
        }
        out
    }

    /// The basis monomial `e^I` scaled by `f`.
    pub fn monomial(dim: usize, slots: &[usize], f: Jet) -> Self {
        let mut mask = 0u32;
        let mut sign = 1.0;
        for &s in slots {
            assert!(s < dim);
            if mask & (1 << s) != 0 {
                return Form::zero(dim, slots.len(), f.order());
            }
            sign *= merge_sign(mask, 1 << s);
            mask |= 1 << s;
        }
        let mut out = Form::zero(dim, slots.len(), f.order());
        out.push(mask, if sign < 0.0 { -f } else { f });
        out
    }

    /// Adds `f e^mask` for an increasing-index bitmask.
    pub fn add_term(&mut self, mask: u32, f: Jet) {
        self.push(mask, f);
    }

    fn push(&mut self, mask: u32, f: Jet) {
        self.order = self.order.min(f.order());
        if f.is_zero() {
            return;
        }
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => {
                let sum = &self.terms[i].1 + &f;
                if sum.is_zero() {
                    self.terms.remove(i);
                } else {
                    self.terms[i].1 = sum;
                }
            }
            Err(i) => self.terms.insert(i, (mask, f)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> &[(u32, Jet)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient jet of `e^I` for increasing `slots`, if present.
    pub fn get(&self, mask: u32) -> Option<&Jet> {
        self.terms
            .binary_search_by_key(&mask, |t| t.0)
            .ok()
            .map(|i| &self.terms[i].1)
    }

    /// Value at the base point of the coefficient of `e^mask`.
    pub fn value(&self, mask: u32) -> f64 {
        self.get(mask).map_or(0.0, Jet::value)
    }

    /// Max absolute coefficient value at the base point.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0f64, |m, (_, f)| m.max(f.value().abs()))
    }

    /// Max absolute difference of coefficient values.
    pub fn distance(&self, other: &Form) -> f64 {
        (self - other).max_abs()
    }

    /// Multiplies every coefficient by the function `f`.
    pub fn mul_fn(&self, f: &Jet) -> Form {
        let mut out = Form::zero(self.dim, self.degree, self.order.min(f.order()));
        for (m, c) in &self.terms {
            out.push(*m, c * f);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Form {
        let mut out = Form::zero(self.dim, self.degree, self.order);
        for (m, c) in &self.terms {
            out.push(*m, c.scale(s));
        }
        out
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        let mut out = Form::zero(self.dim, self.degree + other.degree, self.order.min(other.order));
        for (ma, fa) in &self.terms {
            for (mb, fb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let prod = fa * fb;
                let prod = if merge_sign(*ma, *mb) < 0.0 { -prod } else { prod };
                out.push(ma | mb, prod);
            }
        }
        out
    }

    /// Exterior derivative.
    pub fn d(&self) -> Result<Form, JetError> {
        if self.order == 0 {
            return Err(JetError::OrderOverflow {
                requested: 1,
                available: 0,
            });
        }
        let mut out = Form::zero(self.dim, self.degree + 1, self.order - 1);
        for (m, f) in &self.terms {
            for k in 0..self.dim {
                if m & (1 << k) != 0 {
                    continue;
                }
                let df = f.partial(k)?;
                let df = if merge_sign(1 << k, *m) < 0.0 { -df } else { df };
                out.push(m | (1 << k), df);
            }
        }
        Ok(out)
    }

    /// Interior product with the coordinate vector field dual to slot `k`.
    pub fn interior(&self, k: usize) -> Form {
        let mut out = Form::zero(self.dim, self.degree.saturating_sub(1), self.order);
        for (m, f) in &self.terms {
            if m & (1 << k) == 0 {
                continue;
            }
            let sign = (m & ((1 << k) - 1)).count_ones() % 2;
            out.push(m & !(1 << k), if sign == 1 { -f } else { f.clone() });
        }
        out
    }

    /// Keeps only the terms with exactly `h` of the first `split` slots.
    pub fn type_part(&self, split: usize, h: usize) -> Form {
        let low = (1u32 << split) - 1;
        let mut out = Form::zero(self.dim, self.degree, self.order);
        for (m, f) in &self.terms {
            if (m & low).count_ones() as usize == h {
                out.push(*m, f.clone());
            }
        }
        out
    }

    /// Substitutes `e^i ↦ images[i]` (one-forms) and expands.
    pub fn substitute(&self, images: &[Form]) -> Form {
        assert_eq!(images.len(), self.dim);
        let dim = images.first().map_or(self.dim, |f| f.dim);
        let order = images.iter().fold(self.order, |o, f| o.min(f.order));
        let mut out = Form::zero(dim, self.degree, order);
        for (m, f) in &self.terms {
            let mut acc = Form::function(dim, f.clone());
            let mut rest = *m;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                acc = acc.wedge(&images[k]);
                rest &= rest - 1;
            }
            out = out + acc;
        }
        out
    }
}

impl Add for Form {
    type Output = Form;
    fn add(self, rhs: Form) -> Form {
        &self + &rhs
    }
}

impl Sub for Form {
    type Output = Form;
    fn sub(self, rhs: Form) -> Form {
        &self - &rhs
    }
}

impl<'a> Add<&'a Form> for &'a Form {
    type Output = Form;
    fn add(self, rhs: &Form) -> Form {
        assert_eq!((self.dim, self.degree), (rhs.dim, rhs.degree));
        let mut out = self.clone();
        out.order = out.order.min(rhs.order);
        for (m, f) in &rhs.terms {
            out.push(*m, f.clone());
        }
        out
    }
}

impl<'a> Sub<&'a Form> for &'a Form {
    type Output = Form;
    fn sub(self, rhs: &Form) -> Form {
        self + &(-rhs)
    }
}

impl Neg for &Form {
    type Output = Form;
    fn neg(self) -> Form {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.1 = -&t.1;
        }
        out
    }
}

impl Neg for Form {
    type Output = Form;
    fn neg(self) -> Form {
        -&self
    }
}

/// Sum of forms, with the zero form of the given shape for an empty input.
pub fn form_sum(dim: usize, degree: usize, order: usize, it: impl IntoIterator<Item = Form>) -> Form {
    it.into_iter().fold(Form::zero(dim, degree, order), |acc, f| acc + f)
}

/// `Σ_i a_i ∧ b_i`.
pub fn dot_wedge(a: &[Form], b: &[Form]) -> Form {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let shape = a[0].wedge(&b[0]);
    a.iter().zip(b).skip(1).fold(shape, |acc, (x, y)| acc + x.wedge(y))
}

/// `Σ_i v^i φ_i`.
pub fn contract(v: &[Jet], phi: &[Form]) -> Form {
    assert_eq!(v.len(), phi.len());
    assert!(!phi.is_empty());
    let first = phi[0].mul_fn(&v[0]);
    v.iter().zip(phi).skip(1).fold(first, |acc, (c, f)| acc + f.mul_fn(c))
}

/// `(m·φ)_a = Σ_b m_ab φ_b` for a row-major `k×k` matrix of functions.
pub fn mat_apply(m: &[Jet], phi: &[Form]) -> Vec<Form> {
    let k = phi.len();
    assert_eq!(m.len(), k * k);
    (0..k).map(|a| contract(&m[a * k..(a + 1) * k], phi)).collect()
}

/// Max coefficient magnitude over a family of forms.
pub fn max_abs_all(forms: &[Form]) -> f64 {
    forms.iter().fold(0.0f64, |m, f| m.max(f.max_abs()))
}

/// Max coefficient distance between two families of forms.
pub fn distance_all(a: &[Form], b: &[Form]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max(x.distance(y)))
}

/// Change between the coordinate cobasis `e^i` and a new cobasis
/// `f^j = B^j_i e^i`.
#[derive(Debug, Clone)]
pub struct CobasisMap {
    dim: usize,
    /// Row-major `B^j_i`.
    forward: Vec<Jet>,
    inverse: Vec<Jet>,
}

impl CobasisMap {
    pub fn new(forward: Vec<Jet>, dim: usize) -> Result<Self, JetError> {
        let (inverse, _) = invert_matrix(&forward, dim)?;
        Ok(CobasisMap { dim, forward, inverse })
    }

    /// The new basis forms in coordinates.
    pub fn basis_forms(&self) -> Vec<Form> {
        (0..self.dim)
            .map(|j| Form::one_form(&self.forward[j * self.dim..(j + 1) * self.dim]))
            .collect()
    }

    /// Re-expresses a coordinate form on the new cobasis.
    pub fn to_adapted(&self, f: &Form) -> Form {
        // e^i = (B^{-1})^i_j f^j
        let images: Vec<Form> = (0..self.dim)
            .map(|i| Form::one_form(&self.inverse[i * self.dim..(i + 1) * self.dim]))
            .collect();
        f.substitute(&images)
    }

    /// Inverse of [`CobasisMap::to_adapted`].
    pub fn from_adapted(&self, f: &Form) -> Form {
        f.substitute(&self.basis_forms())
    }
}
