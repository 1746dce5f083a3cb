//! Brute-force Levi-Civita calculus in the full coordinate basis `(u, v, x^i)`.
//!
//! Nothing here uses the Brinkmann structure beyond assembling `g_{αβ}`; the
//! results serve as ground truth for [`crate::curvature`].

use nalgebra::DMatrix;
use thiserror::Error;

use crate::chart::{frame_from_values, ChartError, ChartPoint, FrameData, MetricSpec};
use crate::curvature::{CurvaturePack, DerivPack, EngineOutput, SecondDerivPack};
use crate::expr::Expr;
use crate::field::{ravel, unravel, Basis, FrameTensor, Variance};
use crate::jet::Jet;

use Variance::{Down, Up};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("coordinate metric is singular at {0}")]
    Singular(String),
    #[error("jet order {order} too small for depth {depth}")]
    Order { order: usize, depth: usize },
}

/// Full metric `g_{αβ}` as jets in all `n` coordinates.
#[derive(Debug, Clone)]
pub struct CoordinateMetric {
    pub n: usize,
    pub order: usize,
    pub g: Vec<Vec<Jet>>,
    /// Numeric inverse at the base point.
    pub g_inv: DMatrix<f64>,
    /// `H` and `W_i` values at the base point, for the frame.
    pub h_value: f64,
    pub w_values: Vec<f64>,
}

/// Seeds in `[u, x2, ...]` slot order, each a jet in all `n` coordinates.
fn full_seeds(p: &ChartPoint, n: usize, order: usize) -> Vec<Jet> {
    let mut out = vec![Jet::seed(0, p.u, n, order).expect("u in range")];
    for (k, &x) in p.x.iter().enumerate() {
        out.push(Jet::seed(k + 2, x, n, order).expect("x in range"));
    }
    out
}

pub fn assemble_coordinate_metric(
    spec: &MetricSpec,
    p: &ChartPoint,
    order: usize,
) -> Result<CoordinateMetric, OracleError> {
    let n = spec.n();
    if p.x.len() != n - 2 {
        return Err(ChartError::PointDimension { expected: n - 2, got: p.x.len() }.into());
    }
    let seeds = full_seeds(p, n, order);
    let ev = |name: &str, e: &Expr| {
        e.eval_jet(&seeds)
            .map_err(|source| OracleError::Chart(ChartError::Eval { name: name.to_string(), source }))
    };
    let zero = Jet::zero(n, order);
    let mut g = vec![vec![zero.clone(); n]; n];
    let h = ev("H", spec.h())?;
    g[0][0] = h.scale(-2.0);
    g[0][1] = zero.constant_like(-1.0);
    g[1][0] = zero.constant_like(-1.0);
    let mut w_values = Vec::with_capacity(n - 2);
    for i in 2..n {
        let w = ev(&format!("W{i}"), &spec.w()[i - 2])?;
        w_values.push(w.value());
        g[0][i] = -&w;
        g[i][0] = -&w;
        for j in i..n {
            let gij = ev(&format!("g{i}{j}"), &spec.g()[i - 2][j - 2])?;
            g[j][i] = gij.clone();
            g[i][j] = gij;
        }
    }
    let g0 = DMatrix::from_fn(n, n, |a, b| g[a][b].value());
    let g_inv = g0.clone().try_inverse().ok_or_else(|| OracleError::Singular(p.to_string()))?;
    Ok(CoordinateMetric { n, order, g, g_inv, h_value: h.value(), w_values })
}

/// Inverse of a jet matrix by Gauss-Jordan elimination with partial pivoting
/// on the constant terms.
fn gauss_jordan_inverse(a: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = a.len();
    let nv = a[0][0].num_vars();
    let order = a.iter().flatten().map(|j| j.order()).min()?;
    let mut m: Vec<Vec<Jet>> = a.iter().map(|r| r.iter().map(|j| j.truncate(order)).collect()).collect();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| Jet::constant(nv, order, if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| {
            m[x][col].value().abs().partial_cmp(&m[y][col].value().abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].value().abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let r = m[col][col].recip().ok()?;
        for j in 0..n {
            m[col][j] = &m[col][j] * &r;
            inv[col][j] = &inv[col][j] * &r;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[i][col].clone();
            if f.max_abs() == 0.0 {
                continue;
            }
            for j in 0..n {
                let dm = &f * &m[col][j];
                m[i][j] -= &dm;
                let di = &f * &inv[col][j];
                inv[i][j] -= &di;
            }
        }
    }
    Some(inv)
}

/// Dense jet tensor over the full coordinate range.
#[derive(Debug, Clone)]
struct CoordJets {
    variance: Vec<Variance>,
    n: usize,
    data: Vec<Jet>,
}

impl CoordJets {
    fn build(variance: Vec<Variance>, n: usize, mut f: impl FnMut(&[usize]) -> Jet) -> CoordJets {
        let dims = vec![n; variance.len()];
        let len = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let data = (0..len)
            .map(|flat| {
                unravel(flat, &dims, &mut idx);
                f(&idx)
            })
            .collect();
        CoordJets { variance, n, data }
    }

    fn get(&self, idx: &[usize]) -> &Jet {
        let dims = vec![self.n; self.variance.len()];
        &self.data[ravel(idx, &dims)]
    }

    fn values(&self) -> FrameTensor {
        let slots = self.variance.iter().map(|&v| (v, Basis::Full)).collect();
        let mut t = FrameTensor::zeros(self.n, slots);
        for (d, j) in t.data_mut().iter_mut().zip(&self.data) {
            *d = j.value();
        }
        t
    }

    /// `∇_ε T`, derivative slot first.
    fn covariant(&self, gamma: &CoordJets) -> CoordJets {
        let n = self.n;
        let mut variance = vec![Down];
        variance.extend_from_slice(&self.variance);
        let var = self.variance.clone();
        let r = var.len();
        CoordJets::build(variance, n, |ix| {
            let e = ix[0];
            let t = &ix[1..];
            let mut acc = self.get(t).diff(e);
            let mut j = t.to_vec();
            for a in 0..r {
                for k in 0..n {
                    j[a] = k;
                    match var[a] {
                        Up => acc.add_product(1.0, gamma.get(&[t[a], e, k]), self.get(&j)),
                        Down => acc.add_product(-1.0, gamma.get(&[k, e, t[a]]), self.get(&j)),
                    }
                }
                j[a] = t[a];
            }
            acc
        })
    }
}

/// Coordinate components: `Γ^α_{βγ}`, `R^α_{βγδ}`, `∇_ε R^α_{βγδ}`, `∇_ζ∇_ε R^α_{βγδ}`.
#[derive(Debug, Clone)]
pub struct CoordinateCurvature {
    pub gamma: FrameTensor,
    pub riemann: FrameTensor,
    pub nabla_r: Option<FrameTensor>,
    pub nabla2_r: Option<FrameTensor>,
}

pub fn coordinate_curvature(cm: &CoordinateMetric, depth: usize) -> Result<CoordinateCurvature, OracleError> {
    if cm.order < 2 + depth {
        return Err(OracleError::Order { order: cm.order, depth });
    }
    let n = cm.n;
    let ginv = gauss_jordan_inverse(&cm.g).ok_or_else(|| OracleError::Singular("base point".into()))?;
    let dg: Vec<Vec<Vec<Jet>>> =
        (0..n).map(|c| (0..n).map(|a| (0..n).map(|b| cm.g[a][b].diff(c)).collect()).collect()).collect();
    let gamma_low = CoordJets::build(vec![Down, Down, Down], n, |ix| {
        let (rho, b, c) = (ix[0], ix[1], ix[2]);
        (&(&dg[c][rho][b] + &dg[b][rho][c]) - &dg[rho][b][c]).scale(0.5)
    });
    let gamma = CoordJets::build(vec![Up, Down, Down], n, |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        let mut acc = Jet::zero(n, cm.order - 1);
        for rho in 0..n {
            acc.add_product(1.0, &ginv[a][rho], gamma_low.get(&[rho, b, c]));
        }
        acc
    });
    let riemann = CoordJets::build(vec![Up, Down, Down, Down], n, |ix| {
        let (a, b, c, d) = (ix[0], ix[1], ix[2], ix[3]);
        let mut acc = &gamma.get(&[a, b, d]).diff(c) - &gamma.get(&[a, b, c]).diff(d);
        for e in 0..n {
            acc.add_product(1.0, gamma.get(&[a, c, e]), gamma.get(&[e, b, d]));
            acc.add_product(-1.0, gamma.get(&[a, d, e]), gamma.get(&[e, b, c]));
        }
        acc
    });
    let (nabla_r, nabla2_r) = if depth >= 1 {
        let nr = riemann.covariant(&gamma);
        let nnr = if depth >= 2 { Some(nr.covariant(&gamma).values()) } else { None };
        (Some(nr.values()), nnr)
    } else {
        (None, None)
    };
    Ok(CoordinateCurvature { gamma: gamma.values(), riemann: riemann.values(), nabla_r, nabla2_r })
}

/// Numeric Christoffel symbols only, for integrators.
pub fn christoffel_at(spec: &MetricSpec, p: &ChartPoint) -> Result<FrameTensor, OracleError> {
    let cm = assemble_coordinate_metric(spec, p, 1)?;
    let n = cm.n;
    let d: Vec<DMatrix<f64>> = (0..n)
        .map(|c| DMatrix::from_fn(n, n, |a, b| cm.g[a][b].diff(c).value()))
        .collect();
    Ok(FrameTensor::from_fn(n, vec![(Up, Basis::Full), (Down, Basis::Full), (Down, Basis::Full)], |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        (0..n)
            .map(|r| 0.5 * cm.g_inv[(a, r)] * (d[c][(r, b)] + d[b][(r, c)] - d[r][(b, c)]))
            .sum()
    }))
}

pub fn frame_of(cm: &CoordinateMetric) -> FrameData {
    frame_from_values(cm.n, cm.h_value, &cm.w_values)
}

/// Converts a coordinate tensor to partly-null-frame components.
pub fn to_frame(t: &FrameTensor, frame: &FrameData) -> FrameTensor {
    let n = t.n();
    assert!(t.slots().iter().all(|s| s.1 == Basis::Full), "expected coordinate slots");
    let dims = t.dims();
    let mut cur = t.data().to_vec();
    let mut idx = vec![0; dims.len()];
    for (a, &(var, _)) in t.slots().iter().enumerate() {
        let mut next = vec![0.0; cur.len()];
        for (flat, out) in next.iter_mut().enumerate() {
            unravel(flat, &dims, &mut idx);
            let alpha = idx[a];
            let mut acc = 0.0;
            for mu in 0..n {
                let c = match var {
                    Up => frame.theta[(alpha, mu)],
                    Down => frame.e[(alpha, mu)],
                };
                if c != 0.0 {
                    idx[a] = mu;
                    acc += c * cur[ravel(&idx, &dims)];
                }
            }
            *out = acc;
        }
        cur = next;
    }
    let mut f = FrameTensor::zeros(n, t.slots().to_vec());
    f.data_mut().copy_from_slice(&cur);
    f
}

/// Restricts frame slots to fixed frame indices or to the leaf range.
#[derive(Debug, Clone, Copy)]
pub enum Pick {
    Fixed(usize),
    Leaf,
}

pub fn extract(t: &FrameTensor, picks: &[Pick]) -> FrameTensor {
    assert_eq!(picks.len(), t.rank());
    let n = t.n();
    let slots: Vec<(Variance, Basis)> = picks
        .iter()
        .zip(t.slots())
        .filter_map(|(p, s)| match p {
            Pick::Leaf => Some((s.0, Basis::Leaf)),
            Pick::Fixed(_) => None,
        })
        .collect();
    let mut full = vec![0; picks.len()];
    FrameTensor::from_fn(n, slots, |ix| {
        let mut k = 0;
        for (a, p) in picks.iter().enumerate() {
            full[a] = match p {
                Pick::Fixed(v) => *v,
                Pick::Leaf => {
                    k += 1;
                    ix[k - 1] + 2
                }
            };
        }
        t.get(&full)
    })
}

/// Oracle values packaged exactly like the engine output.
#[derive(Debug, Clone)]
pub struct OraclePacks {
    pub curvature: CurvaturePack,
    pub first: Option<DerivPack>,
    pub second: Option<SecondDerivPack>,
    /// Frame components of the full Riemann tensor.
    pub riemann_frame: FrameTensor,
}

pub fn oracle_packs(spec: &MetricSpec, p: &ChartPoint, depth: usize) -> Result<OraclePacks, OracleError> {
    let cm = assemble_coordinate_metric(spec, p, 2 + depth)?;
    let cc = coordinate_curvature(&cm, depth)?;
    let frame = frame_of(&cm);
    let n = cm.n;
    let r = to_frame(&cc.riemann, &frame);
    use Pick::{Fixed as F, Leaf as L};

    let ric = FrameTensor::from_fn(n, vec![(Down, Basis::Full), (Down, Basis::Full)], |ix| {
        (0..n).map(|a| r.get(&[a, ix[0], a, ix[1]])).sum()
    });
    let g0 = DMatrix::from_fn(n, n, |a, b| cm.g[a][b].value());
    let eta = &frame.e * g0 * frame.e.transpose();
    let eta_inv = eta.try_inverse().ok_or_else(|| OracleError::Singular(p.to_string()))?;
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += eta_inv[(a, b)] * ric.get(&[a, b]);
        }
    }
    let curvature = CurvaturePack {
        rbar: extract(&r, &[L, L, L, L]),
        a: extract(&r, &[F(1), L, F(0), L]),
        b: extract(&r, &[F(1), L, L, L]),
        r_i0k: extract(&r, &[L, L, F(0), L]),
        ric00: ric.get(&[0, 0]),
        ric0i: extract(&ric, &[F(0), L]),
        ricij: extract(&ric, &[L, L]),
        s,
    };
    let first = cc.nabla_r.as_ref().map(|nr| {
        let f = to_frame(nr, &frame);
        DerivPack {
            atil: extract(&f, &[F(0), F(1), L, F(0), L]),
            ahat: extract(&f, &[L, F(1), L, F(0), L]),
            btil: extract(&f, &[F(0), F(1), L, L, L]),
            bhat: extract(&f, &[L, F(1), L, L, L]),
            rtil: extract(&f, &[F(0), L, L, L, L]),
            grad_rbar: extract(&f, &[L, L, L, L, L]),
        }
    });
    let second = cc.nabla2_r.as_ref().map(|nnr| {
        let f = to_frame(nnr, &frame);
        let outer = [(L, L), (F(0), L), (L, F(0)), (F(0), F(0))];
        let mut blocks = Vec::with_capacity(12);
        for tail in [[L, L, L, L], [F(1), L, L, L], [F(1), L, F(0), L]] {
            for (z, e) in outer {
                let mut picks = vec![z, e];
                picks.extend_from_slice(&tail);
                blocks.push(extract(&f, &picks));
            }
        }
        SecondDerivPack { blocks }
    });
    Ok(OraclePacks { curvature, first, second, riemann_frame: r })
}

/// Engine-vs-oracle deviation of one named block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDeviation {
    pub name: &'static str,
    pub abs: f64,
    pub rel: f64,
}

/// `max|e − o| / max(1, max|o|)`.
pub fn rel_dev(e: &FrameTensor, o: &FrameTensor) -> f64 {
    e.max_abs_diff(o) / o.max_abs().max(1.0)
}

/// Compares every block both sides computed.
pub fn compare(engine: &EngineOutput, oracle: &OraclePacks) -> Vec<BlockDeviation> {
    let mut pairs: Vec<(&'static str, FrameTensor, FrameTensor)> = Vec::new();
    for ((name, a), (_, b)) in engine.curvature.blocks().into_iter().zip(oracle.curvature.blocks()) {
        pairs.push((name, a, b));
    }
    if let (Some(e), Some(o)) = (&engine.first, &oracle.first) {
        for ((name, a), (_, b)) in e.blocks().into_iter().zip(o.blocks()) {
            pairs.push((name, a, b));
        }
    }
    if let (Some(e), Some(o)) = (&engine.second, &oracle.second) {
        for ((name, a), (_, b)) in e.named().into_iter().zip(o.named()) {
            pairs.push((name, a, b));
        }
    }
    pairs
        .into_iter()
        .map(|(name, a, b)| BlockDeviation { name, abs: a.max_abs_diff(&b), rel: rel_dev(&a, &b) })
        .collect()
}

/// Lowers the first (contravariant) slot of a coordinate tensor.
pub fn lower_first(t: &FrameTensor, g: &DMatrix<f64>) -> FrameTensor {
    let n = t.n();
    let mut slots = t.slots().to_vec();
    slots[0].0 = Down;
    let mut j = vec![0; t.rank()];
    FrameTensor::from_fn(n, slots, |ix| {
        j.copy_from_slice(ix);
        let mut acc = 0.0;
        for k in 0..n {
            j[0] = k;
            acc += g[(ix[0], k)] * t.get(&j);
        }
        acc
    })
}
