//! Generators for Cahen–Wallach metrics, products with symmetric Riemannian
//! blocks, chart changes and a few test fixtures.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chart::{ChartError, ChartPoint, MetricSpec};
use crate::expr::{Expr, Func, Var};
use crate::sampling;
use crate::symbolic::{self as sym, add, call, mul, num, pow, sub, var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("CW dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("CW order must be at least 1")]
    Order,
    #[error("coefficient matrix {index} is {rows}x{cols}, expected {m}x{m}")]
    Shape { index: usize, rows: usize, cols: usize, m: usize },
    #[error("coefficient matrix {index} is not symmetric")]
    NonSymmetric { index: usize },
    #[error("x-map count {got} does not match the leaf dimension {expected}")]
    MapCount { expected: usize, got: usize },
    #[error("x-map for x{0} is not affine in the leaf coordinates")]
    NotAffine(usize),
    #[error("x-map Jacobian is singular at {0}")]
    SingularJacobian(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("evaluating the chart change: {0}")]
    Eval(String),
    #[error("unknown fixture {0}")]
    UnknownFixture(String),
}

/// `H = P_ij(u) x^i x^j` with `P(u) = Σ_k coeffs[k] u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CwParams {
    pub d: usize,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl CwParams {
    pub fn new(d: usize, coeffs: Vec<DMatrix<f64>>) -> Result<CwParams, SpaceError> {
        if d < 2 {
            return Err(SpaceError::Dimension(d));
        }
        if coeffs.is_empty() {
            return Err(SpaceError::Order);
        }
        let m = d - 2;
        for (index, c) in coeffs.iter().enumerate() {
            if c.nrows() != m || c.ncols() != m {
                return Err(SpaceError::Shape { index, rows: c.nrows(), cols: c.ncols(), m });
            }
            if (c - c.transpose()).abs().max() > 0.0 {
                return Err(SpaceError::NonSymmetric { index });
            }
        }
        Ok(CwParams { d, coeffs })
    }

    pub fn r(&self) -> usize {
        self.coeffs.len()
    }

    /// The top coefficient is nonzero.
    pub fn proper(&self) -> bool {
        self.coeffs.last().is_some_and(|c| c.abs().max() > 0.0)
    }

    pub fn p_at(&self, u: f64) -> DMatrix<f64> {
        let m = self.d - 2;
        self.coeffs
            .iter()
            .rev()
            .fold(DMatrix::zeros(m, m), |acc, c| acc * u + c)
    }
}

fn poly_u(coeffs: &[f64]) -> Expr {
    sym::sum(
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, &c)| mul(num(c), pow(var(Var::U), k as i32))),
    )
}

/// Symmetric quadratic form `Σ_ij c_ij(u) x^i x^j`, written with the
/// upper triangle only.
fn quadratic_form(m: usize, entry: impl Fn(usize, usize) -> Vec<f64>) -> Expr {
    let mut terms = Vec::new();
    for i in 0..m {
        for j in i..m {
            let mut c = entry(i, j);
            if i != j {
                c.iter_mut().for_each(|x| *x *= 2.0);
            }
            let p = poly_u(&c);
            if p.is_zero() {
                continue;
            }
            let xx = if i == j {
                pow(var(Var::x(i + 2)), 2)
            } else {
                mul(var(Var::x(i + 2)), var(Var::x(j + 2)))
            };
            terms.push(mul(p, xx));
        }
    }
    sym::sum(terms)
}

fn identity_g(m: usize) -> Vec<Vec<Expr>> {
    (0..m).map(|i| (0..m).map(|j| num(if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

pub fn make_cw(params: &CwParams) -> Result<MetricSpec, SpaceError> {
    let m = params.d - 2;
    let h = quadratic_form(m, |i, j| params.coeffs.iter().map(|c| c[(i, j)]).collect());
    Ok(MetricSpec::new(params.d, h, vec![num(0.0); m], identity_g(m), None)?)
}

/// Riemannian factor appended to the leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// Round 2-sphere in polar coordinates `(θ, φ)`.
    Sphere { radius: f64 },
    /// Hyperbolic plane in horospherical coordinates `r²(dx² + e^{2x} dy²)`.
    Hyperbolic { radius: f64 },
    Euclidean { k: usize },
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Sphere { .. } | Block::Hyperbolic { .. } => 2,
            Block::Euclidean { k } => *k,
        }
    }
}

pub fn make_product(base: &MetricSpec, block: Block) -> Result<MetricSpec, SpaceError> {
    let (n0, m0) = (base.n(), base.m());
    let k = block.size();
    let m = m0 + k;
    let mut g = identity_g(m);
    for i in 0..m0 {
        for j in 0..m0 {
            g[i][j] = base.g()[i][j].clone();
        }
    }
    let mut domain = base.domain().to_vec();
    let a = Var::x(n0);
    match block {
        Block::Sphere { radius } => {
            let r2 = radius * radius;
            g[m0][m0] = num(r2);
            g[m0 + 1][m0 + 1] = mul(num(r2), pow(call(Func::Sin, var(a)), 2));
            domain.push((0.3, 2.8));
            domain.push((-1.0, 1.0));
        }
        Block::Hyperbolic { radius } => {
            let r2 = radius * radius;
            g[m0][m0] = num(r2);
            g[m0 + 1][m0 + 1] = mul(num(r2), call(Func::Exp, mul(num(2.0), var(a))));
            domain.push((-1.0, 1.0));
            domain.push((-1.0, 1.0));
        }
        Block::Euclidean { .. } => domain.extend(std::iter::repeat_n((-1.0, 1.0), k)),
    }
    let mut w = base.w().to_vec();
    w.extend(std::iter::repeat_n(num(0.0), k));
    Ok(MetricSpec::new(n0 + k, base.h().clone(), w, g, Some(domain))?)
}

/// `u' = u − u0`, `v' = v + F(u, x)`, `x'^i = x_maps[i](u, x)`, with the
/// x-maps affine in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartChange {
    pub f: Expr,
    pub x_maps: Vec<Expr>,
    pub u_shift: f64,
}

impl ChartChange {
    pub fn identity(m: usize) -> ChartChange {
        ChartChange { f: num(0.0), x_maps: (0..m).map(|i| var(Var::x(i + 2))).collect(), u_shift: 0.0 }
    }

    /// `x' = R(ωu + φ)x + c(u)` in the plane of leaf indices `(a, b)`.
    pub fn rotation(m: usize, a: usize, b: usize, omega: f64, phase: f64, c: Vec<Expr>) -> ChartChange {
        let angle = add(mul(num(omega), var(Var::U)), num(phase));
        let (cs, sn) = (call(Func::Cos, angle.clone()), call(Func::Sin, angle));
        let mut maps: Vec<Expr> = (0..m).map(|i| var(Var::x(i + 2))).collect();
        let (xa, xb) = (var(Var::x(a + 2)), var(Var::x(b + 2)));
        maps[a] = sub(mul(cs.clone(), xa.clone()), mul(sn.clone(), xb.clone()));
        maps[b] = add(mul(sn, xa), mul(cs, xb));
        for (i, ci) in c.into_iter().enumerate() {
            maps[i] = add(maps[i].clone(), ci);
        }
        ChartChange { f: num(0.0), x_maps: maps, u_shift: 0.0 }
    }

    /// Image of a point of the original chart.
    pub fn map_point(&self, p: &ChartPoint) -> Result<ChartPoint, SpaceError> {
        let vals = p.values();
        let x = self
            .x_maps
            .iter()
            .map(|e| e.eval(&vals).map_err(|e| SpaceError::Eval(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChartPoint::new(p.u - self.u_shift, x))
    }
}

/// Rewrites `spec` in the primed chart. The new domain is the bounding box
/// of the image of sample points of the old one.
pub fn apply_chart_change(spec: &MetricSpec, ch: &ChartChange) -> Result<MetricSpec, SpaceError> {
    let (n, m) = (spec.n(), spec.m());
    if ch.x_maps.len() != m {
        return Err(SpaceError::MapCount { expected: m, got: ch.x_maps.len() });
    }
    let xv = |i: usize| Var::x(i + 2);
    let probes = sampling::default_samples(spec.domain(), 17, 0);
    let eval = |e: &Expr, p: &ChartPoint| e.eval(&p.values()).map_err(|e| SpaceError::Eval(e.to_string()));

    // M(u) and c(u) of x' = M x + c
    let mut jac = vec![vec![num(0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            let d = sym::diff(&ch.x_maps[i], xv(j));
            for k in 0..m {
                let dd = sym::diff(&d, xv(k));
                for p in &probes {
                    if eval(&dd, p)?.abs() > 1e-12 {
                        return Err(SpaceError::NotAffine(i + 2));
                    }
                }
            }
            jac[i][j] = d;
        }
    }
    let zero_x = |v: Var| if v.0 >= 2 { Some(num(0.0)) } else { None };
    let c: Vec<Expr> = ch.x_maps.iter().map(|e| sym::substitute(e, &zero_x)).collect();
    for p in &probes {
        let mut jm = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                jm[(i, j)] = eval(&jac[i][j], p)?;
            }
        }
        if m > 0 && jm.clone().lu().determinant().abs() < 1e-12 {
            return Err(SpaceError::SingularJacobian(p.to_string()));
        }
    }
    let minv = if m == 0 { Vec::new() } else { sym::inverse(&jac) };

    // ψ(u, x') = M^{-1}(x' − c), the old leaf coordinates as functions of the new.
    let psi: Vec<Expr> = (0..m)
        .map(|j| sym::sum((0..m).map(|k| mul(minv[j][k].clone(), sub(var(xv(k)), c[k].clone())))))
        .collect();
    let psi_dot: Vec<Expr> = psi.iter().map(|e| sym::diff(e, Var::U)).collect();
    let compose = |e: &Expr| sym::substitute(e, &|v: Var| if v.0 >= 2 { Some(psi[v.0 - 2].clone()) } else { None });

    let h = compose(spec.h());
    let w: Vec<Expr> = spec.w().iter().map(compose).collect();
    let g: Vec<Vec<Expr>> = spec.g().iter().map(|row| row.iter().map(compose).collect()).collect();
    let f_tilde = sym::neg(compose(&ch.f));

    let mut h_terms = vec![h, sym::diff(&f_tilde, Var::U)];
    for j in 0..m {
        h_terms.push(mul(w[j].clone(), psi_dot[j].clone()));
        for k in 0..m {
            h_terms.push(mul(num(-0.5), mul(g[j][k].clone(), mul(psi_dot[j].clone(), psi_dot[k].clone()))));
        }
    }
    let h_new = sym::sum(h_terms);

    let w_new: Vec<Expr> = (0..m)
        .map(|i| {
            let mut terms = vec![sym::diff(&f_tilde, xv(i))];
            for j in 0..m {
                terms.push(mul(w[j].clone(), minv[j][i].clone()));
                for k in 0..m {
                    terms.push(sym::neg(mul(g[j][k].clone(), mul(psi_dot[j].clone(), minv[k][i].clone()))));
                }
            }
            sym::sum(terms)
        })
        .collect();
    let g_new: Vec<Vec<Expr>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut terms = Vec::new();
                    for k in 0..m {
                        for l in 0..m {
                            terms.push(mul(g[k][l].clone(), mul(minv[k][i].clone(), minv[l][j].clone())));
                        }
                    }
                    sym::sum(terms)
                })
                .collect()
        })
        .collect();

    // Back to u' = u − u0.
    let shift = |e: &Expr| {
        if ch.u_shift == 0.0 {
            e.clone()
        } else {
            sym::substitute(e, &|v: Var| if v == Var::U { Some(add(var(Var::U), num(ch.u_shift))) } else { None })
        }
    };
    let h_new = shift(&h_new);
    let w_new: Vec<Expr> = w_new.iter().map(shift).collect();
    let mut g_sym: Vec<Vec<Expr>> = g_new.iter().map(|r| r.iter().map(shift).collect()).collect();
    for i in 0..m {
        for j in 0..i {
            g_sym[i][j] = g_sym[j][i].clone();
        }
    }

    let mut lo = vec![f64::INFINITY; m + 1];
    let mut hi = vec![f64::NEG_INFINITY; m + 1];
    let mut grid = sampling::default_samples(spec.domain(), 64, 0);
    grid.extend(corners(spec.domain()));
    for p in &grid {
        let q = ch.map_point(p)?;
        for (k, x) in q.values().into_iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let domain = lo.into_iter().zip(hi).collect();
    Ok(MetricSpec::new(n, h_new, w_new, g_sym, Some(domain))?)
}

fn corners(domain: &[(f64, f64)]) -> Vec<ChartPoint> {
    let d = domain.len();
    (0..1usize << d)
        .map(|mask| {
            let vals: Vec<f64> = (0..d)
                .map(|k| if mask >> k & 1 == 1 { domain[k].1 } else { domain[k].0 })
                .collect();
            ChartPoint::from_values(&vals)
        })
        .collect()
}

/// Random affine chart change: rotation in a random leaf plane, polynomial
/// translation and `F`, small `u` shift.
pub fn random_chart_change(m: usize, seed: u64) -> ChartChange {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<Expr> = (0..m)
        .map(|_| {
            let c0 = round3(rng.random_range(-0.3..0.3));
            let c1 = round3(rng.random_range(-0.3..0.3));
            let c2 = round3(rng.random_range(-0.3..0.3));
            poly_u(&[c0, c1, c2])
        })
        .collect();
    let mut ch = if m >= 2 {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let omega = round3(rng.random_range(-1.0..1.0));
        let phase = round3(rng.random_range(-3.0..3.0));
        ChartChange::rotation(m, a, b, omega, phase, c)
    } else {
        let mut ch = ChartChange::identity(m);
        for (i, ci) in c.into_iter().enumerate() {
            ch.x_maps[i] = add(ch.x_maps[i].clone(), ci);
        }
        ch
    };
    let fx = if m > 0 { mul(num(round3(rng.random_range(-0.5..0.5))), var(Var::x(2))) } else { num(0.0) };
    ch.f = add(poly_u(&[0.0, round3(rng.random_range(-0.5..0.5)), round3(rng.random_range(-0.5..0.5))]), mul(var(Var::U), fx));
    ch.u_shift = round3(rng.random_range(-0.2..0.2));
    ch
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// All monomials in `nvars` variables of total degree at most `deg`.
fn monomials(nvars: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; nvars]];
    let mut frontier = out.clone();
    for _ in 0..deg {
        let mut next = Vec::new();
        for mono in &frontier {
            let last = mono.iter().rposition(|&e| e > 0).unwrap_or(0);
            for v in last..nvars {
                let mut m2 = mono.clone();
                m2[v] += 1;
                next.push(m2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn monomial_expr(exps: &[usize]) -> Expr {
    exps.iter()
        .enumerate()
        .filter(|(_, e)| **e > 0)
        .fold(num(1.0), |acc, (slot, &e)| mul(acc, pow(var(Var::from_slot(slot)), e as i32)))
}

fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, deg: usize, scale: f64) -> Expr {
    sym::sum(monomials(nvars, deg).into_iter().map(|mono| {
        let c = round3(scale * rng.random_range(-1.0..1.0));
        mul(num(c), monomial_expr(&mono))
    }))
}

/// Generic polynomial metric on the box `[-0.5, 0.5]^{n-1}`: cubic `H`,
/// quadratic `W`, and `g = δ + 0.05·(quadratic)`.
pub fn random_polynomial_spec(n: usize, seed: u64) -> Result<MetricSpec, SpaceError> {
    if n < 2 {
        return Err(SpaceError::Dimension(n));
    }
    let m = n - 2;
    let nv = m + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_poly(&mut rng, nv, 3, 1.0);
    let w: Vec<Expr> = (0..m).map(|_| random_poly(&mut rng, nv, 2, 0.5)).collect();
    let mut g = identity_g(m);
    for i in 0..m {
        for j in i..m {
            let p = random_poly(&mut rng, nv, 2, 0.05);
            g[i][j] = add(g[i][j].clone(), p);
            g[j][i] = g[i][j].clone();
        }
    }
    Ok(MetricSpec::new(n, h, w, g, Some(vec![(-0.5, 0.5); nv]))?)
}

/// `n = 4`, `H = ½(x2)²`, `W = ω(x3, −x2)`: constant skew `t_23 = ω`.
pub fn rotation_w_spec(omega: f64) -> MetricSpec {
    let h = mul(num(0.5), pow(var(Var::x(2)), 2));
    let w = vec![mul(num(omega), var(Var::x(3))), mul(num(-omega), var(Var::x(2)))];
    MetricSpec::new(4, h, w, identity_g(2), None).expect("valid rotation spec")
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
}

/// `P(u) = diag(u, 1)`.
pub fn cw4_order2_params() -> CwParams {
    CwParams::new(4, vec![diag(&[0.0, 1.0]), diag(&[1.0, 0.0])]).unwrap()
}

/// Rotation of angle `0.3u` in the (2,3) plane plus translation `(u², 0)`.
pub fn scramble_change() -> ChartChange {
    ChartChange::rotation(2, 0, 1, 0.3, 0.0, vec![pow(var(Var::U), 2), num(0.0)])
}

pub const FIXTURES: [&str; 13] = [
    "flat",
    "cw2",
    "cw4_order1",
    "cw4_order2",
    "cw4_order3",
    "cw6_order1",
    "cw6_order2",
    "cw4_order2_x_sphere",
    "cw4_order1_x_hyperbolic",
    "rotation_w",
    "scrambled_cw4_order2",
    "random_1",
    "random_2",
];

/// Named fixture metrics.
pub fn fixture(name: &str) -> Result<MetricSpec, SpaceError> {
    let cw = |d, c| make_cw(&CwParams::new(d, c)?);
    match name {
        "flat" => cw(4, vec![DMatrix::zeros(2, 2)]),
        "cw2" => cw(2, vec![DMatrix::zeros(0, 0)]),
        "cw4_order1" => cw(4, vec![diag(&[1.0, -1.0])]),
        "cw4_order2" => make_cw(&cw4_order2_params()),
        "cw4_order3" => cw(4, vec![diag(&[0.0, 1.0]), DMatrix::zeros(2, 2), diag(&[1.0, 0.0])]),
        "cw6_order1" => cw(
            6,
            vec![DMatrix::from_row_slice(4, 4, &[
                1.0, 0.5, 0.0, 0.0, //
                0.5, -1.0, 0.0, 0.0, //
                0.0, 0.0, 2.0, 0.0, //
                0.0, 0.0, 0.0, 0.5,
            ])],
        ),
        "cw6_order2" => cw(
            6,
            vec![
                diag(&[0.0, 1.0, -1.0, 2.0]),
                DMatrix::from_row_slice(4, 4, &[
                    1.0, 0.5, 0.0, 0.0, //
                    0.5, -1.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 2.0,
                ]),
            ],
        ),
        "cw4_order2_x_sphere" => make_product(&make_cw(&cw4_order2_params())?, Block::Sphere { radius: 1.0 }),
        "cw4_order1_x_hyperbolic" => make_product(&fixture("cw4_order1")?, Block::Hyperbolic { radius: 1.0 }),
        "rotation_w" => Ok(rotation_w_spec(0.7)),
        "scrambled_cw4_order2" => apply_chart_change(&make_cw(&cw4_order2_params())?, &scramble_change()),
        "random_1" => random_polynomial_spec(5, 1),
        "random_2" => random_polynomial_spec(5, 2),
        other => Err(SpaceError::UnknownFixture(other.to_string())),
    }
}
