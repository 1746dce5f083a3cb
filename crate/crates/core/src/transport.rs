//! Geodesics, parallel transport and `D₀`-transport, integrated with RK4 on
//! the oracle's coordinate Christoffel symbols.
//!
//! States are full coordinate vectors `(u, v, x^2, ..., x^{n-1})`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chart::{coordinate_metric_at, ChartError, ChartPoint, LeafGeometry, MetricSpec};
use crate::ode::rk4_step;
use crate::oracle::{assemble_coordinate_metric, christoffel_at, coordinate_curvature, OracleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("left the admissible box at tau={tau} (u={u}, x={x:?})")]
    LeftBox { tau: f64, u: f64, x: Vec<f64> },
    #[error("integration blew up at tau={0}")]
    BlowUp(f64),
    #[error("vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("need at least one step")]
    Steps,
    #[error("degenerate plane: g(X,X) = {0:e}")]
    Degenerate(f64),
    #[error("trajectory needs at least three samples")]
    TooShort,
}

fn chart_point(q: &[f64]) -> ChartPoint {
    ChartPoint::new(q[0], q[2..].to_vec())
}

fn inside(spec: &MetricSpec, tau: f64, q: &[f64]) -> Result<ChartPoint, TransportError> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(TransportError::BlowUp(tau));
    }
    let p = chart_point(q);
    if !spec.contains(&p) {
        return Err(TransportError::LeftBox { tau, u: p.u, x: p.x });
    }
    Ok(p)
}

fn check_len(spec: &MetricSpec, v: &[f64]) -> Result<(), TransportError> {
    if v.len() != spec.n() {
        return Err(TransportError::Dimension { expected: spec.n(), got: v.len() });
    }
    Ok(())
}

/// `Γ^a_{bc} p^b q^c`.
fn gamma_contract(gamma: &crate::field::FrameTensor, n: usize, p: &[f64], q: &[f64]) -> Vec<f64> {
    let data = gamma.data();
    let mut out = vec![0.0; n];
    for (a, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in 0..n {
            if p[b] == 0.0 {
                continue;
            }
            for c in 0..n {
                acc += data[(a * n + b) * n + c] * p[b] * q[c];
            }
        }
        *o = acc;
    }
    out
}

/// A curve with known position and velocity.
pub trait Curve {
    fn position(&self, tau: f64) -> Vec<f64>;
    fn velocity(&self, tau: f64) -> Vec<f64>;
}

/// Integrated curve with positions and velocities at uniform `τ_k`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub step: f64,
}

impl Trajectory {
    fn segment(&self, tau: f64) -> (usize, f64) {
        let n = self.taus.len() - 1;
        let s = ((tau - self.taus[0]) / self.step).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        (k, s - k as f64)
    }
}

impl Curve for Trajectory {
    /// Cubic Hermite between samples.
    fn position(&self, tau: f64) -> Vec<f64> {
        let (k, x) = self.segment(tau);
        let h = self.step;
        let (x2, x3) = (x * x, x * x * x);
        let (h00, h10, h01, h11) = (2.0 * x3 - 3.0 * x2 + 1.0, x3 - 2.0 * x2 + x, -2.0 * x3 + 3.0 * x2, x3 - x2);
        (0..self.points[k].len())
            .map(|i| {
                h00 * self.points[k][i]
                    + h10 * h * self.velocities[k][i]
                    + h01 * self.points[k + 1][i]
                    + h11 * h * self.velocities[k + 1][i]
            })
            .collect()
    }

    fn velocity(&self, tau: f64) -> Vec<f64> {
        let (k, x) = self.segment(tau);
        let h = self.step;
        let x2 = x * x;
        let (d00, d10, d01, d11) = (6.0 * x2 - 6.0 * x, 3.0 * x2 - 4.0 * x + 1.0, -6.0 * x2 + 6.0 * x, 3.0 * x2 - 2.0 * x);
        (0..self.points[k].len())
            .map(|i| {
                (d00 * self.points[k][i] + d01 * self.points[k + 1][i]) / h
                    + d10 * self.velocities[k][i]
                    + d11 * self.velocities[k + 1][i]
            })
            .collect()
    }
}

/// `q(τ) = q0 + a τ + b τ²`.
#[derive(Debug, Clone)]
pub struct QuadraticCurve {
    pub q0: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Curve for QuadraticCurve {
    fn position(&self, tau: f64) -> Vec<f64> {
        (0..self.q0.len()).map(|i| self.q0[i] + self.a[i] * tau + self.b[i] * tau * tau).collect()
    }

    fn velocity(&self, tau: f64) -> Vec<f64> {
        (0..self.q0.len()).map(|i| self.a[i] + 2.0 * self.b[i] * tau).collect()
    }
}

/// RK4 for `ẍ^α + Γ^α_βγ ẋ^β ẋ^γ = 0`.
pub fn geodesic_integrate(
    spec: &MetricSpec,
    q0: &[f64],
    qdot0: &[f64],
    tau_span: f64,
    steps: usize,
) -> Result<Trajectory, TransportError> {
    check_len(spec, q0)?;
    check_len(spec, qdot0)?;
    if steps == 0 {
        return Err(TransportError::Steps);
    }
    let n = spec.n();
    inside(spec, 0.0, q0)?;
    let h = tau_span / steps as f64;
    let mut rhs = |tau: f64, y: &[f64]| -> Result<Vec<f64>, TransportError> {
        let p = inside(spec, tau, &y[..n])?;
        let gamma = christoffel_at(spec, &p)?;
        let acc = gamma_contract(&gamma, n, &y[n..], &y[n..]);
        let mut out = y[n..].to_vec();
        out.extend(acc.iter().map(|a| -a));
        Ok(out)
    };
    let mut y: Vec<f64> = q0.iter().chain(qdot0).copied().collect();
    let mut traj = Trajectory { taus: vec![0.0], points: vec![q0.to_vec()], velocities: vec![qdot0.to_vec()], step: h };
    for k in 0..steps {
        let tau = k as f64 * h;
        y = rk4_step(&mut rhs, tau, &y, h)?;
        inside(spec, tau + h, &y[..n])?;
        traj.taus.push(tau + h);
        traj.points.push(y[..n].to_vec());
        traj.velocities.push(y[n..].to_vec());
    }
    Ok(traj)
}

/// RK4 for `Ẋ^a = −Γ^a_bc γ'^b X^c` along `curve`, several vectors at once,
/// sampled at `τ_k = k·span/steps`.
pub fn parallel_transport(
    spec: &MetricSpec,
    curve: &impl Curve,
    vectors: &[Vec<f64>],
    tau_span: f64,
    steps: usize,
) -> Result<Vec<Vec<Vec<f64>>>, TransportError> {
    if steps == 0 {
        return Err(TransportError::Steps);
    }
    for v in vectors {
        check_len(spec, v)?;
    }
    let n = spec.n();
    let h = tau_span / steps as f64;
    let mut rhs = |tau: f64, y: &[f64]| -> Result<Vec<f64>, TransportError> {
        let q = curve.position(tau);
        let p = inside(spec, tau, &q)?;
        let gamma = christoffel_at(spec, &p)?;
        let qd = curve.velocity(tau);
        let mut out = Vec::with_capacity(y.len());
        for x in y.chunks(n) {
            out.extend(gamma_contract(&gamma, n, &qd, x).iter().map(|a| -a));
        }
        Ok(out)
    };
    let mut y: Vec<f64> = vectors.iter().flatten().copied().collect();
    let mut out = vec![vectors.to_vec()];
    for k in 0..steps {
        y = rk4_step(&mut rhs, k as f64 * h, &y, h)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TransportError::BlowUp((k + 1) as f64 * h));
        }
        out.push(y.chunks(n).map(|c| c.to_vec()).collect());
    }
    Ok(out)
}

/// Leaf vectors transported by `D₀X = 0` along the `E₀` integral curve
/// through `p` (leaf coordinates fixed, `u` running over `u_span`).
#[derive(Debug, Clone)]
pub struct D0Transport {
    pub us: Vec<f64>,
    /// `[sample][vector][component]`.
    pub vectors: Vec<Vec<Vec<f64>>>,
}

pub fn d0_transport(
    spec: &MetricSpec,
    p: &ChartPoint,
    vectors: &[Vec<f64>],
    u_span: f64,
    steps: usize,
) -> Result<D0Transport, TransportError> {
    if steps == 0 {
        return Err(TransportError::Steps);
    }
    let m = spec.m();
    for v in vectors {
        if v.len() != m {
            return Err(TransportError::Dimension { expected: m, got: v.len() });
        }
    }
    let h = u_span / steps as f64;
    let mut rhs = |u: f64, y: &[f64]| -> Result<Vec<f64>, TransportError> {
        let q = ChartPoint::new(u, p.x.clone());
        if !spec.contains(&q) {
            return Err(TransportError::LeftBox { tau: u - p.u, u, x: q.x });
        }
        let geo = LeafGeometry::new(spec, &q, 1)?;
        let mut out = Vec::with_capacity(y.len());
        for x in y.chunks(m) {
            for i in 0..m {
                out.push((0..m).map(|k| geo.t_mix.at(&[i, k]).value() * x[k]).sum());
            }
        }
        Ok(out)
    };
    let mut y: Vec<f64> = vectors.iter().flatten().copied().collect();
    let mut res = D0Transport { us: vec![p.u], vectors: vec![vectors.to_vec()] };
    for k in 0..steps {
        let u = p.u + k as f64 * h;
        y = rk4_step(&mut rhs, u, &y, h)?;
        res.us.push(u + h);
        res.vectors.push(y.chunks(m).map(|c| c.to_vec()).collect());
    }
    Ok(res)
}

/// Lightlike velocity `E₀ + ½ḡ(ξ,ξ)E₁ + ξ^i E_i` at `q` in coordinates.
pub fn lightlike_velocity(spec: &MetricSpec, q: &[f64], xi: &[f64]) -> Result<Vec<f64>, TransportError> {
    check_len(spec, q)?;
    let m = spec.m();
    if xi.len() != m {
        return Err(TransportError::Dimension { expected: m, got: xi.len() });
    }
    let p = chart_point(q);
    let vals = p.values();
    let g = spec.leaf_metric_at(&p)?;
    let xv = DVector::from_column_slice(xi);
    let c = 0.5 * (xv.transpose() * &g * &xv)[(0, 0)];
    let eval = |name: String, e: &crate::expr::Expr| {
        e.eval(&vals).map_err(|source| TransportError::Chart(ChartError::Eval { name, source }))
    };
    let hv = eval("H".into(), spec.h())?;
    let mut wx = 0.0;
    for (i, w) in spec.w().iter().enumerate() {
        wx += xi[i] * eval(format!("W{}", i + 2), w)?;
    }
    let mut out = vec![1.0, -hv + c - wx];
    out.extend_from_slice(xi);
    Ok(out)
}

pub fn inner(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    (DVector::from_column_slice(a).transpose() * g * DVector::from_column_slice(b))[(0, 0)]
}

/// Drift of `g(γ',γ')` and `g(K,γ')` with `K = −∂_v`.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicInvariants {
    pub energy_drift: f64,
    pub killing_drift: f64,
}

pub fn geodesic_invariants(spec: &MetricSpec, traj: &Trajectory) -> Result<GeodesicInvariants, TransportError> {
    let n = spec.n();
    let mut k = vec![0.0; n];
    k[1] = -1.0;
    let mut e0 = None;
    let mut c0 = None;
    let (mut de, mut dc): (f64, f64) = (0.0, 0.0);
    for (q, v) in traj.points.iter().zip(&traj.velocities) {
        let g = coordinate_metric_at(spec, &chart_point(q))?;
        let e = inner(&g, v, v);
        let c = inner(&g, &k, v);
        let e0 = *e0.get_or_insert(e);
        let c0 = *c0.get_or_insert(c);
        de = de.max((e - e0).abs());
        dc = dc.max((c - c0).abs());
    }
    Ok(GeodesicInvariants { energy_drift: de, killing_drift: dc })
}

/// Null sectional curvature along a lightlike geodesic.
#[derive(Debug, Clone)]
pub struct NullSectional {
    pub taus: Vec<f64>,
    pub k: Vec<f64>,
    /// Forward differences `(K_{j+1} − K_j)/Δτ`.
    pub dk: Vec<f64>,
    /// `max |K_{j+1} − 2K_j + K_{j−1}|` divided by the span.
    pub constancy_residual: f64,
    /// `max |K_j − K_0|`.
    pub k_variation: f64,
}

/// `K_V = R(V,X,V,X)/g(X,X)` with `V = γ'` and `X` parallel along `γ`.
pub fn null_sectional_growth(
    spec: &MetricSpec,
    traj: &Trajectory,
    x0: &[f64],
    tol: f64,
) -> Result<NullSectional, TransportError> {
    let steps = traj.taus.len() - 1;
    if steps < 2 {
        return Err(TransportError::TooShort);
    }
    let span = traj.taus[steps] - traj.taus[0];
    let xs = parallel_transport(spec, traj, &[x0.to_vec()], span, steps)?;
    let n = spec.n();
    let mut k = Vec::with_capacity(steps + 1);
    for (j, q) in traj.points.iter().enumerate() {
        let p = chart_point(q);
        let cm = assemble_coordinate_metric(spec, &p, 2)?;
        let cc = coordinate_curvature(&cm, 0)?;
        let g = coordinate_metric_at(spec, &p)?;
        let (v, x) = (&traj.velocities[j], &xs[j][0]);
        let gxx = inner(&g, x, x);
        if gxx <= tol {
            return Err(TransportError::Degenerate(gxx));
        }
        // R^a_{bcd} X^b V^c X^d lowered with V
        let r = cc.riemann.data();
        let mut acc = 0.0;
        for a in 0..n {
            let mut ra = 0.0;
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        ra += r[((a * n + b) * n + c) * n + d] * x[b] * v[c] * x[d];
                    }
                }
            }
            let va: f64 = (0..n).map(|e| g[(a, e)] * v[e]).sum();
            acc += va * ra;
        }
        k.push(acc / gxx);
    }
    let h = traj.step;
    let dk: Vec<f64> = k.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let second = k.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
    let var = k.iter().map(|v| (v - k[0]).abs()).fold(0.0, f64::max);
    Ok(NullSectional {
        taus: traj.taus.clone(),
        k,
        dk,
        constancy_residual: second / span.abs(),
        k_variation: var,
    })
}

/// Applies `m` to slot `slot` of a rank-`r` row-major tensor.
fn apply_mode(data: &[f64], n: usize, r: usize, slot: usize, m: &DMatrix<f64>) -> Vec<f64> {
    let inner = n.pow((r - slot - 1) as u32);
    let outer = n.pow(slot as u32);
    let mut out = vec![0.0; data.len()];
    for o in 0..outer {
        for a_new in 0..n {
            for a in 0..n {
                let c = m[(a_new, a)];
                if c == 0.0 {
                    continue;
                }
                let src = (o * n + a) * inner;
                let dst = (o * n + a_new) * inner;
                for i in 0..inner {
                    out[dst + i] += c * data[src + i];
                }
            }
        }
    }
    out
}

/// `∇_e R^a_{bcd}` in the frame with columns `frame`.
fn nabla_r_in_frame(spec: &MetricSpec, q: &[f64], frame: &DMatrix<f64>) -> Result<Vec<f64>, TransportError> {
    let n = spec.n();
    let cm = assemble_coordinate_metric(spec, &chart_point(q), 3)?;
    let cc = coordinate_curvature(&cm, 1)?;
    let mut data = cc.nabla_r.expect("depth 1").data().to_vec();
    let inv = frame.clone().try_inverse().ok_or(TransportError::Degenerate(0.0))?;
    let ft = frame.transpose();
    // slots: e (down), a (up), b, c, d (down)
    for slot in 0..5 {
        let m = if slot == 1 { &inv } else { &ft };
        data = apply_mode(&data, n, 5, slot, m);
    }
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct TransportCheck {
    pub pass: bool,
    /// `max |Δ component| / (1 + max |component|)` over curves and samples.
    pub max_variation: f64,
    pub curves: usize,
}

/// Random quadratic curves from the box center with random-direction frames;
/// checks that `∇R` has constant components in the transported frame.
pub fn second_symmetry_transport_check(
    spec: &MetricSpec,
    curves: usize,
    seed: u64,
    tol: f64,
) -> Result<TransportCheck, TransportError> {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = {
        let c = spec.center();
        let mut q = vec![c.u, 0.0];
        q.extend(c.x);
        q
    };
    let half: Vec<f64> = {
        let mut h = vec![0.0; n];
        for (k, (lo, hi)) in spec.domain().iter().enumerate() {
            h[if k == 0 { 0 } else { k + 1 }] = 0.5 * (hi - lo);
        }
        h[1] = 1.0;
        h
    };
    let steps = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..curves {
        let a: Vec<f64> = half.iter().map(|h| 0.25 * h * rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = half.iter().map(|h| 0.2 * h * rng.random_range(-1.0..1.0)).collect();
        let curve = QuadraticCurve { q0: center.clone(), a, b };
        let frame0 = loop {
            let f: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * rng.random_range(-1.0..1.0));
            if f.determinant().abs() > 0.1 {
                break f;
            }
        };
        let cols: Vec<Vec<f64>> = (0..n).map(|j| frame0.column(j).iter().copied().collect()).collect();
        let transported = parallel_transport(spec, &curve, &cols, 1.0, steps)?;
        let mut first: Option<Vec<f64>> = None;
        for j in (0..=steps).step_by(steps / 5) {
            let tau = j as f64 / steps as f64;
            let frame = DMatrix::from_fn(n, n, |i, c| transported[j][c][i]);
            let comp = nabla_r_in_frame(spec, &curve.position(tau), &frame)?;
            match &first {
                None => first = Some(comp),
                Some(f0) => {
                    let scale = 1.0 + f0.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    let d = f0.iter().zip(&comp).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    worst = worst.max(d / scale);
                }
            }
        }
    }
    Ok(TransportCheck { pass: worst < tol, max_variation: worst, curves })
}

/// Starting state of the central lightlike geodesic `u ↦ (u, 0, 0)`.
pub fn central_null_start(spec: &MetricSpec, u0: f64) -> Result<(Vec<f64>, Vec<f64>), TransportError> {
    let mut q = vec![u0, 0.0];
    q.extend(std::iter::repeat_n(0.0, spec.m()));
    let v = lightlike_velocity(spec, &q, &vec![0.0; spec.m()])?;
    Ok((q, v))
}
