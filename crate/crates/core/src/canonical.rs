//! Reconstruction of the plane-wave normal form `H' = −A_ab(u) y^a y^b` on
//! the flat block of a 2nd-symmetric metric.
//!
//! The flat-block data `t_ab(u)`, `Λ_ab(u)`, `B_a(u)` are read off
//! `h_a = Λ_ac x^c + B_a` at `x = 0` by jets. Then `Ṙ = −R t` fixes the
//! rotation, the congruence relation fixes `A`, and `D̈ = R B + 2 A D` fixes
//! the translation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::chart::MetricSpec;
use crate::expr::{EvalError, Expr, Var};
use crate::symbolic::{add, diff, mul, neg, num, simplify, sub};
use crate::ode::rk4_step;

pub const DEFAULT_STEPS_PER_UNIT: usize = 2000;
pub const PROJECT_EVERY: usize = 50;
/// Orthogonality drift tolerated between two projections.
pub const MAX_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanonicalError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("flat block index {0} is not a leaf coordinate")]
    BlockIndex(usize),
    #[error("h is not affine on the flat block at u={u} (second derivative {residual:e})")]
    NotAffine { u: f64, residual: f64 },
    #[error("t depends on the flat-block coordinates at u={u} (derivative {residual:e})")]
    TNotConstant { u: f64, residual: f64 },
    #[error("leaf metric is not the identity on the flat block at u={u} (deviation {residual:e})")]
    NotEuclidean { u: f64, residual: f64 },
    #[error("antisymmetric part of Λ differs from −ṫ at u={u} by {residual:e}")]
    LambdaAntisymmetry { u: f64, residual: f64 },
    #[error("empty or non-finite u-interval")]
    Interval,
    #[error("initial rotation is not orthogonal (deviation {0:e})")]
    NotOrthogonal(f64),
    #[error("orthogonality drift {0:e} between projections: increase the step count")]
    StepsTooFew(f64),
    #[error("initial data has the wrong size")]
    InitialSize,
}

/// Sampler for the flat-block data of a spec. The block quantities are
/// differentiated symbolically once and then evaluated pointwise.
#[derive(Debug, Clone)]
pub struct FlatBlockData {
    spec: MetricSpec,
    /// 0-based leaf indices of the block.
    block: Vec<usize>,
    /// Leaf coordinates used off the block (block entries are 0).
    base_x: Vec<f64>,
    h: Vec<Expr>,
    lambda: Vec<Vec<Expr>>,
    t: Vec<Vec<Expr>>,
    t_dot: Vec<Vec<Expr>>,
    dd_h: Vec<Vec<Vec<Expr>>>,
    d_t: Vec<Vec<Vec<Expr>>>,
    g: Vec<Vec<Expr>>,
}

/// Flat-block data at one `u`.
#[derive(Debug, Clone)]
pub struct BlockSample {
    pub t: DMatrix<f64>,
    pub t_dot: DMatrix<f64>,
    /// `Λ_ac = ∂_c h_a`, unsymmetrized.
    pub lambda: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl BlockSample {
    pub fn lambda_sym(&self) -> DMatrix<f64> {
        (&self.lambda + self.lambda.transpose()) * 0.5
    }
}

impl FlatBlockData {
    /// `labels` are printed leaf labels (`2, 3, ...`). Coordinates off the
    /// block sit at the box center.
    pub fn new(spec: &MetricSpec, labels: &[usize]) -> Result<FlatBlockData, CanonicalError> {
        let m = spec.m();
        let mut block = Vec::new();
        for &l in labels {
            if !(2..m + 2).contains(&l) {
                return Err(CanonicalError::BlockIndex(l));
            }
            block.push(l - 2);
        }
        let mut base_x = spec.center().x;
        for &a in &block {
            base_x[a] = 0.0;
        }
        let x = |a: usize| Var::x(block[a] + 2);
        let d = block.len();
        let w = spec.w();
        let g = spec.g();
        let h: Vec<Expr> = (0..d)
            .map(|a| simplify(&sub(diff(spec.h(), x(a)), diff(&w[block[a]], Var::U))))
            .collect();
        let lambda: Vec<Vec<Expr>> = (0..d).map(|a| (0..d).map(|c| diff(&h[a], x(c))).collect()).collect();
        let t: Vec<Vec<Expr>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        let (ia, ib) = (block[a], block[b]);
                        let e = add(neg(diff(&g[ia][ib], Var::U)), sub(diff(&w[ia], x(b)), diff(&w[ib], x(a))));
                        simplify(&mul(num(0.5), e))
                    })
                    .collect()
            })
            .collect();
        let t_dot = t.iter().map(|r| r.iter().map(|e| diff(e, Var::U)).collect()).collect();
        let dd_h = lambda
            .iter()
            .map(|r| r.iter().map(|e| (0..d).map(|c| diff(e, x(c))).collect()).collect())
            .collect();
        let d_t = t
            .iter()
            .map(|r| r.iter().map(|e| (0..d).map(|c| diff(e, x(c))).collect()).collect())
            .collect();
        let gb = block.iter().map(|&i| block.iter().map(|&j| g[i][j].clone()).collect()).collect();
        Ok(FlatBlockData { spec: spec.clone(), block, base_x, h, lambda, t, t_dot, dd_h, d_t, g: gb })
    }

    /// The whole leaf as the flat block.
    pub fn whole_leaf(spec: &MetricSpec) -> Result<FlatBlockData, CanonicalError> {
        let labels: Vec<usize> = (2..spec.n()).collect();
        FlatBlockData::new(spec, &labels)
    }

    pub fn d(&self) -> usize {
        self.block.len()
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    fn values(&self, u: f64) -> Vec<f64> {
        let mut v = vec![u];
        v.extend_from_slice(&self.base_x);
        v
    }

    fn matrix(&self, e: &[Vec<Expr>], v: &[f64]) -> Result<DMatrix<f64>, CanonicalError> {
        let d = self.d();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = e[i][j].eval(v)?;
            }
        }
        Ok(out)
    }

    /// `t` and `ṫ` only (cheap path for the rotation ODE).
    pub fn t_at(&self, u: f64) -> Result<(DMatrix<f64>, DMatrix<f64>), CanonicalError> {
        let v = self.values(u);
        Ok((self.matrix(&self.t, &v)?, self.matrix(&self.t_dot, &v)?))
    }

    pub fn sample(&self, u: f64) -> Result<BlockSample, CanonicalError> {
        let v = self.values(u);
        let mut b = DVector::zeros(self.d());
        for (a, e) in self.h.iter().enumerate() {
            b[a] = e.eval(&v)?;
        }
        Ok(BlockSample {
            t: self.matrix(&self.t, &v)?,
            t_dot: self.matrix(&self.t_dot, &v)?,
            lambda: self.matrix(&self.lambda, &v)?,
            b,
        })
    }

    fn max_abs3(e: &[Vec<Vec<Expr>>], v: &[f64]) -> Result<f64, CanonicalError> {
        let mut m: f64 = 0.0;
        for x in e.iter().flatten().flatten() {
            m = m.max(x.eval(v)?.abs());
        }
        Ok(m)
    }

    /// Checks `g = δ` on the block, the affine form of `h`, the `x`-independence of `t`, and
    /// `Λ_[ab] = −ṫ_ab` at `count` points of the interval.
    pub fn validate(&self, interval: (f64, f64), count: usize, tol: f64) -> Result<(), CanonicalError> {
        for k in 0..count {
            let u = interval.0 + (interval.1 - interval.0) * k as f64 / (count.max(2) - 1) as f64;
            let s = self.sample(u)?;
            let scale = 1.0 + s.lambda.abs().max() + s.t.abs().max();
            let v = self.values(u);
            let gd = self.matrix(&self.g, &v)? - DMatrix::identity(self.d(), self.d());
            if gd.abs().max() > tol {
                return Err(CanonicalError::NotEuclidean { u, residual: gd.abs().max() });
            }
            let curv = Self::max_abs3(&self.dd_h, &v)?;
            if curv > tol * scale {
                return Err(CanonicalError::NotAffine { u, residual: curv });
            }
            let tg = Self::max_abs3(&self.d_t, &v)?;
            if tg > tol * scale {
                return Err(CanonicalError::TNotConstant { u, residual: tg });
            }
            let anti = (&s.lambda - s.lambda.transpose()) * 0.5 + &s.t_dot;
            let r = anti.abs().max();
            if r > tol * scale {
                return Err(CanonicalError::LambdaAntisymmetry { u, residual: r });
            }
        }
        Ok(())
    }
}

fn check_interval(interval: (f64, f64)) -> Result<(), CanonicalError> {
    if !(interval.0.is_finite() && interval.1.is_finite() && interval.0 < interval.1) {
        return Err(CanonicalError::Interval);
    }
    Ok(())
}

/// Flat-block data on a uniform grid and its midpoints, shared by both ODEs.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    /// Nodes `u_0 < ... < u_N`.
    pub us: Vec<f64>,
    /// Samples at half steps: entry `2k` is node `k`, `2k+1` its midpoint.
    pub samples: Vec<BlockSample>,
}

impl BlockGrid {
    pub fn new(data: &FlatBlockData, interval: (f64, f64), steps_per_unit: usize) -> Result<BlockGrid, CanonicalError> {
        check_interval(interval)?;
        let len = interval.1 - interval.0;
        let n = ((len * steps_per_unit as f64).ceil() as usize).max(1);
        let us: Vec<f64> = (0..=n).map(|k| interval.0 + len * k as f64 / n as f64).collect();
        let samples = (0..=2 * n)
            .map(|j| data.sample(interval.0 + len * j as f64 / (2 * n) as f64))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockGrid { us, samples })
    }

    pub fn steps(&self) -> usize {
        self.us.len() - 1
    }

    pub fn d(&self) -> usize {
        self.samples[0].b.len()
    }

    /// Node nearest to `anchor`.
    pub fn anchor_index(&self, anchor: f64) -> usize {
        let n = self.steps();
        let (lo, hi) = (self.us[0], self.us[n]);
        let k = ((anchor.clamp(lo, hi) - lo) / (hi - lo) * n as f64).round() as usize;
        k.min(n)
    }

    fn half_index(&self, u: f64) -> usize {
        let n = self.steps();
        let (lo, hi) = (self.us[0], self.us[n]);
        (((u - lo) / (hi - lo) * (2 * n) as f64).round().max(0.0) as usize).min(2 * n)
    }

    fn at(&self, u: f64) -> &BlockSample {
        &self.samples[self.half_index(u)]
    }
}

fn to_vec(m: &DMatrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

fn from_vec(d: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v)
}

pub fn orthogonality_error(r: &DMatrix<f64>) -> f64 {
    let d = r.nrows();
    (r.transpose() * r - DMatrix::identity(d, d)).abs().max()
}

/// Nearest orthogonal matrix (polar factor).
pub fn polar_project(r: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = r.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Sampled solution of `Ṙ = −R t`.
#[derive(Debug, Clone)]
pub struct RotationCurve {
    pub us: Vec<f64>,
    pub r: Vec<DMatrix<f64>>,
    pub r_dot: Vec<DMatrix<f64>>,
    /// Largest orthogonality drift seen just before a projection.
    pub max_drift: f64,
}

impl RotationCurve {
    /// Cubic Hermite interpolation of `R` between nodes.
    pub fn at(&self, u: f64) -> DMatrix<f64> {
        let n = self.us.len() - 1;
        let (lo, hi) = (self.us[0], self.us[n]);
        let s = ((u - lo) / (hi - lo) * n as f64).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let h = self.us[k + 1] - self.us[k];
        let x = (u - self.us[k]) / h;
        let (x2, x3) = (x * x, x * x * x);
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        &self.r[k] * h00 + &self.r_dot[k] * (h10 * h) + &self.r[k + 1] * h01 + &self.r_dot[k + 1] * (h11 * h)
    }

    pub fn orthogonality_error(&self) -> f64 {
        self.r.iter().map(orthogonality_error).fold(0.0, f64::max)
    }
}

/// Integrates a first-order system from node `k0` to both ends of the grid.
fn integrate_both_ways<E>(
    us: &[f64],
    k0: usize,
    y0: Vec<f64>,
    rhs: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    after_step: &mut impl FnMut(usize, Vec<f64>) -> Result<Vec<f64>, E>,
) -> Result<Vec<Vec<f64>>, E> {
    let n = us.len() - 1;
    let mut states: Vec<Option<Vec<f64>>> = vec![None; n + 1];
    states[k0] = Some(y0.clone());
    for dir in [1i64, -1] {
        let mut k = k0 as i64;
        let mut y = y0.clone();
        let mut count = 0;
        while (dir > 0 && (k as usize) < n) || (dir < 0 && k > 0) {
            let next = (k + dir) as usize;
            y = rk4_step(rhs, us[k as usize], &y, us[next] - us[k as usize])?;
            count += 1;
            y = after_step(count, y)?;
            k += dir;
            states[k as usize] = Some(y.clone());
        }
    }
    Ok(states.into_iter().map(|s| s.expect("every node visited")).collect())
}

/// RK4 for `Ṙ = −R t(u)` from `R(anchor) = r0`, both directions, with polar
/// re-projection every [`PROJECT_EVERY`] steps.
pub fn solve_rotation_ode(grid: &BlockGrid, anchor: f64, r0: &DMatrix<f64>) -> Result<RotationCurve, CanonicalError> {
    let d = grid.d();
    if r0.nrows() != d || r0.ncols() != d {
        return Err(CanonicalError::InitialSize);
    }
    let e0 = orthogonality_error(r0);
    if e0 > 1e-10 {
        return Err(CanonicalError::NotOrthogonal(e0));
    }
    let mut rhs = |u: f64, y: &[f64]| -> Result<Vec<f64>, CanonicalError> {
        Ok(to_vec(&(-(from_vec(d, y) * &grid.at(u).t))))
    };
    let mut max_drift: f64 = 0.0;
    let mut project = |count: usize, y: Vec<f64>| -> Result<Vec<f64>, CanonicalError> {
        if count % PROJECT_EVERY != 0 {
            return Ok(y);
        }
        let m = from_vec(d, &y);
        let drift = orthogonality_error(&m);
        max_drift = max_drift.max(drift);
        if drift > MAX_DRIFT {
            return Err(CanonicalError::StepsTooFew(drift));
        }
        Ok(to_vec(&polar_project(&m)))
    };
    let states = integrate_both_ways(&grid.us, grid.anchor_index(anchor), to_vec(r0), &mut rhs, &mut project)?;
    let r: Vec<DMatrix<f64>> = states.iter().map(|y| from_vec(d, y)).collect();
    let tail = r.iter().map(orthogonality_error).fold(0.0, f64::max);
    if tail > MAX_DRIFT {
        return Err(CanonicalError::StepsTooFew(tail));
    }
    max_drift = max_drift.max(tail);
    let r_dot = r.iter().enumerate().map(|(k, rk)| -(rk * &grid.samples[2 * k].t)).collect();
    Ok(RotationCurve { us: grid.us.clone(), r, r_dot, max_drift })
}

/// `A(u)` from the congruence `Λ_(cd) = −2 A_be R^b_c R^e_d + ½(RᵀR̈ + R̈ᵀR)_cd`
/// with `R̈ = R(t t − ṫ)` from the rotation ODE.
pub fn recover_a(sample: &BlockSample, r: &DMatrix<f64>) -> DMatrix<f64> {
    let rtr_dd = &sample.t * &sample.t - &sample.t_dot;
    let sym = (&rtr_dd + rtr_dd.transpose()) * 0.5;
    let inner = (sample.lambda_sym() - sym) * -0.5;
    let a = r * inner * r.transpose();
    (&a + a.transpose()) * 0.5
}

/// Sampled solution of `D̈ = R B + 2 A D`.
#[derive(Debug, Clone)]
pub struct TranslationCurve {
    pub us: Vec<f64>,
    pub d: Vec<DVector<f64>>,
    pub d_dot: Vec<DVector<f64>>,
    /// Residual of `B = −2RᵀA D + Rᵀ D̈` with `D̈` from second differences.
    pub residual: f64,
}

pub fn solve_translation_ode(
    grid: &BlockGrid,
    curve: &RotationCurve,
    anchor: f64,
    d0: &DVector<f64>,
    d_dot0: &DVector<f64>,
) -> Result<TranslationCurve, CanonicalError> {
    let d = grid.d();
    if d0.len() != d || d_dot0.len() != d {
        return Err(CanonicalError::InitialSize);
    }
    let mut rhs = |u: f64, y: &[f64]| -> Result<Vec<f64>, CanonicalError> {
        let s = grid.at(u);
        let r = curve.at(u);
        let a = recover_a(s, &r);
        let dv = DVector::from_column_slice(&y[..d]);
        let acc = &r * &s.b + (&a * dv) * 2.0;
        let mut out = y[d..].to_vec();
        out.extend(acc.iter());
        Ok(out)
    };
    let mut y0 = d0.as_slice().to_vec();
    y0.extend_from_slice(d_dot0.as_slice());
    let states = integrate_both_ways(&grid.us, grid.anchor_index(anchor), y0, &mut rhs, &mut |_, y| Ok(y))?;
    let dvec: Vec<DVector<f64>> = states.iter().map(|s| DVector::from_column_slice(&s[..d])).collect();
    let ddot: Vec<DVector<f64>> = states.iter().map(|s| DVector::from_column_slice(&s[d..])).collect();

    let n = grid.steps();
    let mut residual: f64 = 0.0;
    let stride = (n / 16).max(1);
    let mut k = 1;
    while k < n {
        let h = grid.us[k + 1] - grid.us[k];
        let dd = (&dvec[k + 1] - &dvec[k] * 2.0 + &dvec[k - 1]) / (h * h);
        let s = &grid.samples[2 * k];
        let r = &curve.r[k];
        let lhs = r.transpose() * (&dd - (recover_a(s, r) * &dvec[k]) * 2.0);
        residual = residual.max((lhs - &s.b).abs().max());
        k += stride;
    }
    Ok(TranslationCurve { us: grid.us.clone(), d: dvec, d_dot: ddot, residual })
}

#[derive(Debug, Clone)]
pub struct CanonicalOptions {
    pub interval: (f64, f64),
    pub steps_per_unit: usize,
    pub anchor: f64,
    /// Defaults to the identity.
    pub r0: Option<DMatrix<f64>>,
    pub d0: Option<DVector<f64>>,
    pub d_dot0: Option<DVector<f64>>,
    /// Number of output samples of `A`, `R`, `D`.
    pub samples: usize,
}

impl CanonicalOptions {
    pub fn new(interval: (f64, f64)) -> CanonicalOptions {
        let anchor = if interval.0 <= 0.0 && 0.0 <= interval.1 { 0.0 } else { interval.0 };
        CanonicalOptions {
            interval,
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            anchor,
            r0: None,
            d0: None,
            d_dot0: None,
            samples: 21,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub us: Vec<f64>,
    pub a_of_u: Vec<DMatrix<f64>>,
    pub r_of_u: Vec<DMatrix<f64>>,
    pub d_of_u: Vec<DVector<f64>>,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub orthogonality_error: f64,
    pub max_drift: f64,
    pub translation_residual: f64,
}

pub fn reconstruct(data: &FlatBlockData, opts: &CanonicalOptions) -> Result<CanonicalForm, CanonicalError> {
    let d = data.d();
    let r0 = opts.r0.clone().unwrap_or_else(|| DMatrix::identity(d, d));
    let d0 = opts.d0.clone().unwrap_or_else(|| DVector::zeros(d));
    let dd0 = opts.d_dot0.clone().unwrap_or_else(|| DVector::zeros(d));
    let grid = BlockGrid::new(data, opts.interval, opts.steps_per_unit)?;
    let curve = solve_rotation_ode(&grid, opts.anchor, &r0)?;
    let tr = solve_translation_ode(&grid, &curve, opts.anchor, &d0, &dd0)?;
    let ns = opts.samples.max(2);
    let n = grid.steps();
    let mut us = Vec::with_capacity(ns);
    let (mut a_of_u, mut r_of_u, mut d_of_u) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..ns {
        let k = (j * n) / (ns - 1);
        us.push(grid.us[k]);
        a_of_u.push(recover_a(&grid.samples[2 * k], &curve.r[k]));
        r_of_u.push(curve.r[k].clone());
        d_of_u.push(tr.d[k].clone());
    }
    let (a0, a1, _) = affine_fit(&us, &a_of_u);
    Ok(CanonicalForm {
        us,
        a_of_u,
        r_of_u,
        d_of_u,
        a0,
        a1,
        orthogonality_error: curve.orthogonality_error(),
        max_drift: curve.max_drift,
        translation_residual: tr.residual,
    })
}

/// Least-squares `A(u) ≈ A1 u + A0`, entrywise, with the max deviation.
pub fn affine_fit(us: &[f64], a: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = us.len() as f64;
    let ubar = us.iter().sum::<f64>() / n;
    let var: f64 = us.iter().map(|u| (u - ubar).powi(2)).sum();
    let abar = a.iter().fold(DMatrix::zeros(a[0].nrows(), a[0].ncols()), |s, x| s + x) / n;
    let cov = us.iter().zip(a).fold(DMatrix::zeros(abar.nrows(), abar.ncols()), |s, (u, x)| s + (x - &abar) * (u - ubar));
    let a1 = if var > 0.0 { cov / var } else { DMatrix::zeros(abar.nrows(), abar.ncols()) };
    let a0 = &abar - &a1 * ubar;
    let dev = us
        .iter()
        .zip(a)
        .map(|(u, x)| (x - (&a1 * *u + &a0)).abs().max())
        .fold(0.0, f64::max);
    (a0, a1, dev)
}

/// `A1` diagonalized by `O` and `u` shifted to cancel one diagonal entry of `A0`.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub rotation: DMatrix<f64>,
    pub a1_diag: Vec<f64>,
    pub a0: DMatrix<f64>,
    pub u_shift: f64,
}

#[derive(Debug, Clone)]
pub struct CanonicalReport {
    pub affine_residual: f64,
    /// Second-symmetric with `A1 ≠ 0`.
    pub proper: bool,
    /// The affine fit holds, i.e. `Ä = 0` within tolerance.
    pub second_symmetric: bool,
    pub orthogonality_error: f64,
    pub normal_form: NormalForm,
}

pub fn verify_canonical(cf: &CanonicalForm, tol: f64) -> CanonicalReport {
    let (a0, a1, dev) = affine_fit(&cf.us, &cf.a_of_u);
    let d = a1.nrows();
    let scale = 1.0 + cf.a_of_u.iter().map(|a| a.abs().max()).fold(0.0, f64::max);
    let eig = SymmetricEigen::new((&a1 + a1.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let o = DMatrix::from_fn(d, d, |r, k| eig.eigenvectors[(r, order[k])]);
    let a1_diag: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut a0n = o.transpose() * &a0 * &o;
    let mut u_shift = 0.0;
    if let Some(k) = a1_diag.iter().position(|v| v.abs() > tol * scale) {
        u_shift = -a0n[(k, k)] / a1_diag[k];
        for (i, v) in a1_diag.iter().enumerate() {
            a0n[(i, i)] += v * u_shift;
        }
    }
    CanonicalReport {
        affine_residual: dev,
        proper: dev < tol * scale && a1.abs().max() > tol * scale,
        second_symmetric: dev < tol * scale,
        orthogonality_error: cf.orthogonality_error,
        normal_form: NormalForm { rotation: o, a1_diag, a0: a0n, u_shift },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fit_exact_on_lines() {
        let us = [0.0, 0.5, 1.0, 2.0];
        let a: Vec<DMatrix<f64>> = us.iter().map(|u| DMatrix::from_element(1, 1, 3.0 * u - 1.0)).collect();
        let (a0, a1, dev) = affine_fit(&us, &a);
        assert!((a0[(0, 0)] + 1.0).abs() < 1e-14 && (a1[(0, 0)] - 3.0).abs() < 1e-14 && dev < 1e-14);
    }

    #[test]
    fn polar_projection_is_orthogonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.01, -0.02, 0.99]);
        assert!(orthogonality_error(&polar_project(&m)) < 1e-15);
    }
}
