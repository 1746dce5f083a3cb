//! Truncated multivariate Taylor jets.
//!
//! A jet of order `K` in `n` variables stores the Taylor coefficients
//! `∂^α f / α!` for every multi-index with `|α| ≤ K`. Coefficients are laid out
//! densely in graded-lexicographic order, so the coefficients of a lower-order
//! truncation are a prefix of the full array.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Default truncation order used by the curvature pipeline.
pub const DEFAULT_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    VarOutOfRange { index: usize, num_vars: usize },
    #[error("jet shapes differ: ({0} vars, order {1}) vs ({2} vars, order {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("division by a jet with zero constant term")]
    DivisionByZero,
    #[error("{func} undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("multi-index of total degree {degree} exceeds jet order {order}")]
    OrderExceeded { degree: usize, order: usize },
    #[error("multi-index has {got} entries, expected {expected}")]
    IndexLength { got: usize, expected: usize },
}

/// Monomial layout and multiplication table shared by all jets of one shape.
#[derive(Debug)]
pub struct JetShape {
    num_vars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// Triples `(i, j, k)` with `monomials[i] + monomials[j] = monomials[k]`.
    products: Vec<(u32, u32, u32)>,
    /// `raise[v][q]` is the index of `q + e_v`, for `q` of degree `< order`.
    raise: Vec<Vec<u32>>,
    /// Multi-index factorials `α!`.
    factorials: Vec<f64>,
}

impl JetShape {
    fn build(num_vars: usize, order: usize) -> JetShape {
        let mut monomials = Vec::new();
        let mut degree_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let mut current = vec![0u8; num_vars];
            push_degree(&mut monomials, &mut current, 0, d);
            degree_end.push(monomials.len());
        }
        let lookup: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = Vec::new();
        let mut sum = vec![0u8; num_vars];
        for (i, a) in monomials.iter().enumerate() {
            let da: usize = a.iter().map(|&e| e as usize).sum();
            let limit = degree_end[order - da];
            for (j, b) in monomials[..limit].iter().enumerate() {
                for v in 0..num_vars {
                    sum[v] = a[v] + b[v];
                }
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }

        let below = if order == 0 { 0 } else { degree_end[order - 1] };
        let raise = (0..num_vars)
            .map(|v| {
                monomials[..below]
                    .iter()
                    .map(|q| {
                        let mut r = q.clone();
                        r[v] += 1;
                        lookup[&r] as u32
                    })
                    .collect()
            })
            .collect();

        let factorials = monomials
            .iter()
            .map(|m| m.iter().map(|&e| factorial(e as usize)).product())
            .collect();

        JetShape {
            num_vars,
            order,
            monomials,
            lookup,
            products,
            raise,
            factorials,
        }
    }

    /// Shared shape for `(num_vars, order)`, built once per process.
    pub fn get(num_vars: usize, order: usize) -> Arc<JetShape> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry((num_vars, order))
            .or_insert_with(|| Arc::new(JetShape::build(num_vars, order)))
            .clone()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Multi-indices in storage order.
    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, pos: usize, remaining: usize) {
    if pos + 1 == current.len() {
        current[pos] = remaining as u8;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        push_degree(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// A truncated Taylor expansion about a base point.
#[derive(Clone)]
pub struct Jet {
    shape: Arc<JetShape>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.shape.num_vars)
            .field("order", &self.shape.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.shape.num_vars == other.shape.num_vars
            && self.shape.order == other.shape.order
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(num_vars: usize, order: usize, value: f64) -> Jet {
        let shape = JetShape::get(num_vars, order);
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = value;
        Jet { shape, coeffs }
    }

    pub fn zero(num_vars: usize, order: usize) -> Jet {
        Jet::constant(num_vars, order, 0.0)
    }

    /// Jet of the coordinate function `x_var` about `value`.
    pub fn seed(var: usize, value: f64, num_vars: usize, order: usize) -> Result<Jet, JetError> {
        if var >= num_vars {
            return Err(JetError::VarOutOfRange { index: var, num_vars });
        }
        let mut jet = Jet::constant(num_vars, order, value);
        if order > 0 {
            let mut alpha = vec![0u8; num_vars];
            alpha[var] = 1;
            let k = jet.shape.lookup[&alpha];
            jet.coeffs[k] = 1.0;
        }
        Ok(jet)
    }

    /// Builds a jet from coefficients in storage order.
    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let shape = JetShape::get(num_vars, order);
        assert_eq!(coeffs.len(), shape.len(), "coefficient count does not match shape");
        Jet { shape, coeffs }
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn num_vars(&self) -> usize {
        self.shape.num_vars
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant(self.num_vars(), self.order(), value)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_alpha(&self, alpha: &[u8]) -> Result<usize, JetError> {
        if alpha.len() != self.num_vars() {
            return Err(JetError::IndexLength { got: alpha.len(), expected: self.num_vars() });
        }
        let degree: usize = alpha.iter().map(|&e| e as usize).sum();
        if degree > self.order() {
            return Err(JetError::OrderExceeded { degree, order: self.order() });
        }
        Ok(self.shape.lookup[alpha])
    }

    /// Taylor coefficient `∂^α f / α!`.
    pub fn coeff(&self, alpha: &[u8]) -> Result<f64, JetError> {
        Ok(self.coeffs[self.check_alpha(alpha)?])
    }

    /// Raw partial derivative `∂^α f` at the base point.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64, JetError> {
        let k = self.check_alpha(alpha)?;
        Ok(self.coeffs[k] * self.shape.factorials[k])
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let shape = JetShape::get(self.num_vars(), order);
        let coeffs = self.coeffs[..shape.len()].to_vec();
        Jet { shape, coeffs }
    }

    /// Partial derivative in one variable, as a jet of order `K − 1`.
    ///
    /// An order-0 jet carries no derivative information; its derivative is
    /// reported as the zero jet of order 0.
    pub fn diff(&self, var: usize) -> Jet {
        assert!(var < self.num_vars(), "variable {var} out of range");
        let order = self.order();
        if order == 0 {
            return Jet::zero(self.num_vars(), 0);
        }
        let shape = JetShape::get(self.num_vars(), order - 1);
        let raise = &self.shape.raise[var];
        let coeffs = (0..shape.len())
            .map(|q| {
                let r = raise[q] as usize;
                self.coeffs[r] * self.shape.monomials[r][var] as f64
            })
            .collect();
        Jet { shape, coeffs }
    }

    fn same_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.num_vars() != other.num_vars() || self.order() != other.order() {
            return Err(JetError::ShapeMismatch(
                self.num_vars(),
                self.order(),
                other.num_vars(),
                other.order(),
            ));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_shape(other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_shape(other)?;
        Ok(self - other)
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_shape(other)?;
        Ok(self * other)
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.same_shape(other)?;
        Ok(self * &other.recip()?)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { shape: self.shape.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `self += s * other`, truncating `self` if `other` has lower order.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        assert_eq!(self.num_vars(), other.num_vars(), "jets in different variable counts");
        if other.order() < self.order() {
            *self = self.truncate(other.order());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// `self += s * a * b` without allocating the product.
    pub fn add_product(&mut self, s: f64, a: &Jet, b: &Jet) {
        let order = self.order().min(a.order()).min(b.order());
        if order < self.order() {
            *self = self.truncate(order);
        }
        if order == 0 {
            self.coeffs[0] += s * a.coeffs[0] * b.coeffs[0];
            return;
        }
        let shape = self.shape.clone();
        for &(i, j, k) in &shape.products {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            self.coeffs[k] += s * a.coeffs[i] * b.coeffs[j];
        }
    }

    /// Composes with a univariate series `Σ c_k δ^k`, `δ = self − value`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = self.constant_like(series[series.len() - 1]);
        for &c in series[..series.len() - 1].iter().rev() {
            acc = &acc * &delta;
            acc.coeffs[0] += c;
        }
        acc
    }

    fn series_len(&self) -> usize {
        self.order() + 1
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let mut series = Vec::with_capacity(self.series_len());
        let mut c = 1.0 / a0;
        for _ in 0..self.series_len() {
            series.push(c);
            c *= -1.0 / a0;
        }
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..self.series_len()).map(|k| e / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> =
            (0..self.series_len()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> =
            (0..self.series_len()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::Domain { func: "sqrt", value: a0 });
        }
        // Generalized binomial coefficients of (a0 + δ)^(1/2).
        let mut series = Vec::with_capacity(self.series_len());
        let mut binom = 1.0;
        for k in 0..self.series_len() {
            series.push(binom * a0.powf(0.5 - k as f64));
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&series))
    }

    /// Integer power; negative exponents go through the reciprocal.
    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }
}

fn common_order(a: &Jet, b: &Jet) -> usize {
    assert_eq!(a.num_vars(), b.num_vars(), "jets in different variable counts");
    a.order().min(b.order())
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = common_order(self, rhs);
        let shape = JetShape::get(self.num_vars(), order);
        let coeffs = self.coeffs[..shape.len()]
            .iter()
            .zip(&rhs.coeffs[..shape.len()])
            .map(|(a, b)| a + b)
            .collect();
        Jet { shape, coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = common_order(self, rhs);
        let shape = JetShape::get(self.num_vars(), order);
        let coeffs = self.coeffs[..shape.len()]
            .iter()
            .zip(&rhs.coeffs[..shape.len()])
            .map(|(a, b)| a - b)
            .collect();
        Jet { shape, coeffs }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let order = common_order(self, rhs);
        let mut out = Jet::zero(self.num_vars(), order);
        out.add_product(1.0, self, rhs);
        out
    }
}

/// Division panics on a zero constant term; use [`Jet::try_div`] to handle it.
impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip().expect("division by a jet with zero constant term")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.axpy(-1.0, rhs);
    }
}
