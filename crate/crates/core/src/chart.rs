//! Brinkmann charts `g = −2du(dv + H du + W_i dx^i) + g_ij dx^i dx^j`.
//!
//! All metric functions are independent of `v`. Jets are taken in the
//! variables `(u, x^2, ..., x^{n-1})`, with `u` in jet slot 0 and `x^i` in
//! slot `i − 1`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError, Var};
use crate::field::{Basis, FrameTensor, JetTensor, Variance};
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("expected {expected} {what}, got {got}")]
    Count { what: &'static str, expected: usize, got: usize },
    #[error("g{i}{j} and g{j}{i} differ")]
    Asymmetric { i: usize, j: usize },
    #[error("expression for {name} references {var}, which is not a coordinate of this chart")]
    ForeignVariable { name: String, var: String },
    #[error("leaf metric is not positive definite at {point} (pivot ratio {ratio:e})")]
    NotPositiveDefinite { point: String, ratio: f64 },
    #[error("point has {got} leaf coordinates, chart has {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("domain for {0} is empty or not finite")]
    Domain(String),
    #[error("point {0} lies outside the admissible box")]
    OutsideDomain(String),
    #[error("in {name}: {source}")]
    Parse { name: String, source: ParseError },
    #[error("evaluating {name}: {source}")]
    Eval { name: String, source: EvalError },
}

/// A point `(u, x^2, ..., x^{n-1})`; `v` never enters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub u: f64,
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(u: f64, x: Vec<f64>) -> ChartPoint {
        ChartPoint { u, x }
    }

    /// Values in `[u, x2, x3, ...]` order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + 1);
        v.push(self.u);
        v.extend_from_slice(&self.x);
        v
    }

    pub fn from_values(values: &[f64]) -> ChartPoint {
        ChartPoint { u: values[0], x: values[1..].to_vec() }
    }
}

impl std::fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(u={}", self.u)?;
        for (k, x) in self.x.iter().enumerate() {
            write!(f, ", x{}={}", k + 2, x)?;
        }
        write!(f, ")")
    }
}

/// Metric functions of one Brinkmann chart plus its admissible coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    n: usize,
    h: Expr,
    w: Vec<Expr>,
    g: Vec<Vec<Expr>>,
    domain: Vec<(f64, f64)>,
}

impl MetricSpec {
    /// `g` is the full symmetric leaf matrix; `domain` lists `(lo, hi)` for
    /// `u, x2, ...` and defaults to `[-1, 1]` in every coordinate.
    pub fn new(
        n: usize,
        h: Expr,
        w: Vec<Expr>,
        g: Vec<Vec<Expr>>,
        domain: Option<Vec<(f64, f64)>>,
    ) -> Result<MetricSpec, ChartError> {
        if n < 2 {
            return Err(ChartError::Dimension(n));
        }
        let m = n - 2;
        if w.len() != m {
            return Err(ChartError::Count { what: "W components", expected: m, got: w.len() });
        }
        if g.len() != m || g.iter().any(|row| row.len() != m) {
            return Err(ChartError::Count { what: "rows of g", expected: m, got: g.len() });
        }
        for i in 0..m {
            for j in 0..i {
                if g[i][j] != g[j][i] {
                    return Err(ChartError::Asymmetric { i: i + 2, j: j + 2 });
                }
            }
        }
        let domain = domain.unwrap_or_else(|| vec![(-1.0, 1.0); m + 1]);
        if domain.len() != m + 1 {
            return Err(ChartError::Count { what: "domain intervals", expected: m + 1, got: domain.len() });
        }
        for (k, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ChartError::Domain(Var::from_slot(k).to_string()));
            }
        }
        let spec = MetricSpec { n, h, w, g, domain };
        for (name, e) in spec.named_exprs() {
            if let Some(v) = e.max_var() {
                if v.0 == 1 || v.0 >= n {
                    return Err(ChartError::ForeignVariable { name, var: v.to_string() });
                }
            }
        }
        Ok(spec)
    }

    /// Builds a spec from DSL strings. Missing `W` entries default to `0`
    /// and missing `g` entries to the Kronecker delta.
    pub fn from_strings(
        n: usize,
        h: &str,
        w: &[(usize, &str)],
        g: &[((usize, usize), &str)],
        domain: Option<Vec<(f64, f64)>>,
    ) -> Result<MetricSpec, ChartError> {
        if n < 2 {
            return Err(ChartError::Dimension(n));
        }
        let m = n - 2;
        let p = |name: String, text: &str| {
            expr::parse_any(text, n).map_err(|source| ChartError::Parse { name, source })
        };
        let h = p("H".into(), h)?;
        let mut ws = vec![Expr::Num(0.0); m];
        for &(i, text) in w {
            if !(2..n).contains(&i) {
                return Err(ChartError::ForeignVariable { name: format!("W{i}"), var: format!("x{i}") });
            }
            ws[i - 2] = p(format!("W{i}"), text)?;
        }
        let mut gs: Vec<Vec<Expr>> = (0..m)
            .map(|i| (0..m).map(|j| Expr::Num(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        for &((i, j), text) in g {
            if !(2..n).contains(&i) || !(2..n).contains(&j) {
                return Err(ChartError::ForeignVariable { name: format!("g{i}{j}"), var: format!("x{}", i.max(j)) });
            }
            let e = p(format!("g{i}{j}"), text)?;
            gs[i - 2][j - 2] = e.clone();
            gs[j - 2][i - 2] = e;
        }
        MetricSpec::new(n, h, ws, gs, domain)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Leaf dimension `n − 2`.
    pub fn m(&self) -> usize {
        self.n - 2
    }

    pub fn h(&self) -> &Expr {
        &self.h
    }

    pub fn w(&self) -> &[Expr] {
        &self.w
    }

    pub fn g(&self) -> &[Vec<Expr>] {
        &self.g
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<MetricSpec, ChartError> {
        if domain.len() != self.m() + 1 {
            return Err(ChartError::Count {
                what: "domain intervals",
                expected: self.m() + 1,
                got: domain.len(),
            });
        }
        self.domain = domain;
        MetricSpec::new(self.n, self.h, self.w, self.g, Some(self.domain))
    }

    pub fn center(&self) -> ChartPoint {
        let vals: Vec<f64> = self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        ChartPoint::from_values(&vals)
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        p.x.len() == self.m()
            && p.values()
                .iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Every expression with its printed name (`H`, `W2`, `g23`, ...).
    pub fn named_exprs(&self) -> Vec<(String, &Expr)> {
        let mut out = vec![("H".to_string(), &self.h)];
        for (i, w) in self.w.iter().enumerate() {
            out.push((format!("W{}", i + 2), w));
        }
        for i in 0..self.m() {
            for j in i..self.m() {
                out.push((format!("g{}{}", i + 2, j + 2), &self.g[i][j]));
            }
        }
        out
    }

    pub(crate) fn check_point(&self, p: &ChartPoint) -> Result<(), ChartError> {
        if p.x.len() != self.m() {
            return Err(ChartError::PointDimension { expected: self.m(), got: p.x.len() });
        }
        Ok(())
    }

    /// Scalar value of the leaf metric at `p`.
    pub fn leaf_metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>, ChartError> {
        self.check_point(p)?;
        let vals = p.values();
        let m = self.m();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                g[(i, j)] = self.g[i][j].eval(&vals).map_err(|source| ChartError::Eval {
                    name: format!("g{}{}", i + 2, j + 2),
                    source,
                })?;
            }
        }
        Ok(g)
    }
}

/// Positive-definiteness test by symmetric elimination without pivoting.
/// Returns the ratio of smallest to largest pivot (negative or zero if the
/// matrix is not positive definite).
pub fn pivot_ratio(g: &DMatrix<f64>) -> f64 {
    let m = g.nrows();
    if m == 0 {
        return 1.0;
    }
    let mut a = g.clone();
    let mut pivots = Vec::with_capacity(m);
    for k in 0..m {
        let p = a[(k, k)];
        pivots.push(p);
        if p <= 0.0 || !p.is_finite() {
            return if p.is_finite() { p.min(0.0) } else { -1.0 };
        }
        for i in k + 1..m {
            let f = a[(i, k)] / p;
            for j in k + 1..m {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    let max = pivots.iter().cloned().fold(f64::MIN, f64::max);
    let min = pivots.iter().cloned().fold(f64::MAX, f64::min);
    min / max
}

pub const PIVOT_RATIO_MIN: f64 = 1e-10;

/// Jets of the metric functions about one point.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub num_vars: usize,
    pub order: usize,
    pub h: Jet,
    pub w: Vec<Jet>,
    pub g: Vec<Vec<Jet>>,
    /// Numeric inverse of the leaf metric at the base point.
    pub g_inv: DMatrix<f64>,
}

/// Jet seeds for `(u, x2, ...)` about `p`.
pub fn seeds(p: &ChartPoint, order: usize) -> Vec<Jet> {
    let vals = p.values();
    let nv = vals.len();
    vals.iter()
        .enumerate()
        .map(|(k, &v)| Jet::seed(k, v, nv, order).expect("seed index in range"))
        .collect()
}

pub fn eval_metric(spec: &MetricSpec, p: &ChartPoint, order: usize) -> Result<MetricJets, ChartError> {
    spec.check_point(p)?;
    let s = seeds(p, order);
    let ev = |name: String, e: &Expr| e.eval_jet(&s).map_err(|source| ChartError::Eval { name, source });
    let h = ev("H".into(), &spec.h)?;
    let w = spec
        .w
        .iter()
        .enumerate()
        .map(|(i, e)| ev(format!("W{}", i + 2), e))
        .collect::<Result<Vec<_>, _>>()?;
    let m = spec.m();
    let mut g: Vec<Vec<Jet>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            if j < i {
                row.push(g[j][i].clone());
            } else {
                row.push(ev(format!("g{}{}", i + 2, j + 2), &spec.g[i][j])?);
            }
        }
        g.push(row);
    }
    let g0 = DMatrix::from_fn(m, m, |i, j| g[i][j].value());
    let ratio = pivot_ratio(&g0);
    if ratio <= PIVOT_RATIO_MIN {
        return Err(ChartError::NotPositiveDefinite { point: p.to_string(), ratio });
    }
    let g_inv = g0.try_inverse().ok_or_else(|| ChartError::NotPositiveDefinite {
        point: p.to_string(),
        ratio,
    })?;
    Ok(MetricJets { num_vars: m + 1, order, h, w, g, g_inv })
}

/// Inverse of a jet-valued matrix by a Neumann series about its constant part.
pub fn invert_jet_matrix(g: &[Vec<Jet>], g0_inv: &DMatrix<f64>) -> Vec<Vec<Jet>> {
    let m = g.len();
    if m == 0 {
        return Vec::new();
    }
    let nv = g[0][0].num_vars();
    let order = g.iter().flatten().map(|j| j.order()).min().unwrap_or(0);
    let mut delta: Vec<Vec<Jet>> = g
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(order)).collect())
        .collect();
    for row in delta.iter_mut() {
        for j in row.iter_mut() {
            *j = j.add_scalar(-j.value());
        }
    }
    // N = −G0⁻¹ Δ
    let neg: Vec<Vec<Jet>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Jet::zero(nv, order);
                    for k in 0..m {
                        acc.axpy(-g0_inv[(i, k)], &delta[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut term: Vec<Vec<Jet>> =
        (0..m).map(|i| (0..m).map(|j| Jet::constant(nv, order, g0_inv[(i, j)])).collect()).collect();
    let mut sum = term.clone();
    for _ in 0..order {
        let next: Vec<Vec<Jet>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut acc = Jet::zero(nv, order);
                        for k in 0..m {
                            acc.add_product(1.0, &neg[i][k], &term[k][j]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        for i in 0..m {
            for j in 0..m {
                sum[i][j] += &next[i][j];
            }
        }
        term = next;
    }
    sum
}

/// Leaf data shared by the curvature engine: `ḡ`, its inverse, `Γ̄`, `h`, `t`.
#[derive(Debug, Clone)]
pub struct LeafGeometry {
    pub n: usize,
    pub m: usize,
    pub num_vars: usize,
    pub h_fn: Jet,
    pub w: JetTensor,
    pub g: JetTensor,
    pub g_inv: JetTensor,
    /// `Γ̄^i_jk`, slots `[i][j][k]`.
    pub gamma: JetTensor,
    pub h: JetTensor,
    pub h_up: JetTensor,
    pub t: JetTensor,
    /// `t^i_j = g^{ik} t_kj`.
    pub t_mix: JetTensor,
}

use Variance::{Down, Up};

impl LeafGeometry {
    pub fn new(spec: &MetricSpec, p: &ChartPoint, order: usize) -> Result<LeafGeometry, ChartError> {
        let mj = eval_metric(spec, p, order)?;
        Ok(LeafGeometry::from_jets(spec.n(), &mj))
    }

    pub fn from_jets(n: usize, mj: &MetricJets) -> LeafGeometry {
        let m = n - 2;
        let nv = mj.num_vars;
        let g = JetTensor::from_fn(vec![Down, Down], m, |ix| mj.g[ix[0]][ix[1]].clone());
        let inv = invert_jet_matrix(&mj.g, &mj.g_inv);
        let g_inv = JetTensor::from_fn(vec![Up, Up], m, |ix| inv[ix[0]][ix[1]].clone());
        let w = JetTensor::from_fn(vec![Down], m, |ix| mj.w[ix[0]].clone());

        // ∂_k g_ij as dg[k][i][j]
        let dg: Vec<JetTensor> = (0..m).map(|k| g.partial(k + 1)).collect();
        let gamma = JetTensor::from_fn(vec![Up, Down, Down], m, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            let mut acc = Jet::zero(nv, mj.order.saturating_sub(1));
            for r in 0..m {
                let lower = &(dg[k].at(&[r, j]) + dg[j].at(&[r, k])) - dg[r].at(&[j, k]);
                acc.add_product(0.5, g_inv.at(&[i, r]), &lower);
            }
            acc
        });

        let h = JetTensor::from_fn(vec![Down], m, |ix| &mj.h.diff(ix[0] + 1) - &mj.w[ix[0]].diff(0));
        let h_up = raise_first(&g_inv, &h);
        let t = JetTensor::from_fn(vec![Down, Down], m, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let s = &(&mj.w[i].diff(j + 1) - &mj.w[j].diff(i + 1)) - &mj.g[i][j].diff(0);
            s.scale(0.5)
        });
        let t_mix = raise_first(&g_inv, &t);
        LeafGeometry { n, m, num_vars: nv, h_fn: mj.h.clone(), w, g, g_inv, gamma, h, h_up, t, t_mix }
    }

    /// `∇̄T`, with the derivative slot first.
    pub fn cov(&self, t: &JetTensor) -> JetTensor {
        let m = self.m;
        let r = t.rank();
        let derivs: Vec<JetTensor> = (0..m).map(|s| t.partial(s + 1)).collect();
        let mut variance = vec![Down];
        variance.extend_from_slice(t.variance());
        let tv = t.variance().to_vec();
        let mut j = vec![0; r];
        JetTensor::from_fn(variance, m, |ix| {
            let s = ix[0];
            let i = &ix[1..];
            let mut acc = derivs[s].at(i).clone();
            for (a, var) in tv.iter().enumerate() {
                j.copy_from_slice(i);
                for k in 0..m {
                    j[a] = k;
                    match var {
                        Up => acc.add_product(1.0, self.gamma.at(&[i[a], k, s]), t.at(&j)),
                        Down => acc.add_product(-1.0, self.gamma.at(&[k, i[a], s]), t.at(&j)),
                    }
                }
            }
            acc
        })
    }

    /// `D₀T = Ṫ − Σ_up t^i_k T^{..k..} + Σ_down t^k_j T_{..k..}`.
    pub fn d0(&self, t: &JetTensor) -> JetTensor {
        let m = self.m;
        let r = t.rank();
        let dot = t.partial(0);
        let tv = t.variance().to_vec();
        let mut j = vec![0; r];
        JetTensor::from_fn(tv.clone(), m, |ix| {
            let mut acc = dot.at(ix).clone();
            for (a, var) in tv.iter().enumerate() {
                j.copy_from_slice(ix);
                for k in 0..m {
                    j[a] = k;
                    match var {
                        Up => acc.add_product(-1.0, self.t_mix.at(&[ix[a], k]), t.at(&j)),
                        Down => acc.add_product(1.0, self.t_mix.at(&[k, ix[a]]), t.at(&j)),
                    }
                }
            }
            acc
        })
    }
}

/// Raises the first slot of `t` with `g_inv`.
pub fn raise_first(g_inv: &JetTensor, t: &JetTensor) -> JetTensor {
    let m = t.dim();
    let mut variance = t.variance().to_vec();
    variance[0] = Up;
    let mut j = vec![0; t.rank()];
    JetTensor::from_fn(variance, m, |ix| {
        j.copy_from_slice(ix);
        let mut acc = Jet::zero(t.data()[0].num_vars(), t.order().min(g_inv.order()));
        for k in 0..m {
            j[0] = k;
            acc.add_product(1.0, g_inv.at(&[ix[0], k]), t.at(&j));
        }
        acc
    })
}

/// `h` and `t` at a point.
pub fn compute_h_t(spec: &MetricSpec, p: &ChartPoint) -> Result<(FrameTensor, FrameTensor), ChartError> {
    let geo = LeafGeometry::new(spec, p, 2)?;
    Ok((geo.h.values(spec.n()), geo.t.values(spec.n())))
}

/// Leaf Christoffel symbols and their raw derivatives.
#[derive(Debug, Clone)]
pub struct ChristoffelData {
    /// `Γ̄^i_jk`.
    pub gamma: FrameTensor,
    /// `∂_a Γ̄^i_jk` for jet variable `a` (0 is `u`, `k ≥ 1` is `x^{k+1}`).
    pub d_gamma: Vec<FrameTensor>,
    /// `∂_a ∂_b Γ̄^i_jk`, indexed `[a][b]`.
    pub dd_gamma: Vec<Vec<FrameTensor>>,
}

pub fn christoffel_bar(spec: &MetricSpec, p: &ChartPoint) -> Result<ChristoffelData, ChartError> {
    let geo = LeafGeometry::new(spec, p, 3)?;
    let n = spec.n();
    let nv = geo.num_vars;
    let d: Vec<JetTensor> = (0..nv).map(|a| geo.gamma.partial(a)).collect();
    Ok(ChristoffelData {
        gamma: geo.gamma.values(n),
        d_gamma: d.iter().map(|t| t.values(n)).collect(),
        dd_gamma: d
            .iter()
            .map(|t| (0..nv).map(|b| t.partial(b).values(n)).collect())
            .collect(),
    })
}

/// The partly null frame `E_α` and coframe `θ^α` in coordinates `(u, v, x^i)`.
#[derive(Debug, Clone)]
pub struct FrameData {
    /// Row `α` holds the coordinate components of `E_α`.
    pub e: DMatrix<f64>,
    /// Row `α` holds the coordinate components of `θ^α`.
    pub theta: DMatrix<f64>,
}

pub fn frame_components(spec: &MetricSpec, p: &ChartPoint) -> Result<FrameData, ChartError> {
    spec.check_point(p)?;
    let vals = p.values();
    let n = spec.n();
    let hv = spec.h.eval(&vals).map_err(|source| ChartError::Eval { name: "H".into(), source })?;
    let wv = spec
        .w
        .iter()
        .enumerate()
        .map(|(i, e)| e.eval(&vals).map_err(|source| ChartError::Eval { name: format!("W{}", i + 2), source }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(frame_from_values(n, hv, &wv))
}

pub(crate) fn frame_from_values(n: usize, h: f64, w: &[f64]) -> FrameData {
    let mut e = DMatrix::zeros(n, n);
    let mut theta = DMatrix::zeros(n, n);
    e[(0, 0)] = 1.0;
    e[(0, 1)] = -h;
    e[(1, 1)] = 1.0;
    theta[(0, 0)] = 1.0;
    theta[(1, 0)] = h;
    theta[(1, 1)] = 1.0;
    for i in 2..n {
        e[(i, i)] = 1.0;
        e[(i, 1)] = -w[i - 2];
        theta[(i, i)] = 1.0;
        theta[(1, i)] = w[i - 2];
    }
    FrameData { e, theta }
}

/// Full coordinate metric `g_{αβ}` at a point, coordinates `(u, v, x^i)`.
pub fn coordinate_metric_at(spec: &MetricSpec, p: &ChartPoint) -> Result<DMatrix<f64>, ChartError> {
    let vals = p.values();
    let n = spec.n();
    let hv = spec.h.eval(&vals).map_err(|source| ChartError::Eval { name: "H".into(), source })?;
    let g = spec.leaf_metric_at(p)?;
    let mut full = DMatrix::zeros(n, n);
    full[(0, 0)] = -2.0 * hv;
    full[(0, 1)] = -1.0;
    full[(1, 0)] = -1.0;
    for i in 2..n {
        let w = spec.w[i - 2]
            .eval(&vals)
            .map_err(|source| ChartError::Eval { name: format!("W{i}"), source })?;
        full[(0, i)] = -w;
        full[(i, 0)] = -w;
        for j in 2..n {
            full[(i, j)] = g[(i - 2, j - 2)];
        }
    }
    Ok(full)
}

pub(crate) fn leaf_slots(variance: &[Variance]) -> Vec<(Variance, Basis)> {
    variance.iter().map(|&v| (v, Basis::Leaf)).collect()
}
