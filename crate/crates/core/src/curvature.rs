//! Frame components of `R`, `∇R` and `∇∇R` from the leaf data `h`, `t`, `Γ̄`.
//!
//! Conventions: `R(E_γ, E_δ)E_β = R^α_{βγδ} E_α`; covariant-derivative slots
//! are stored first, outermost derivative leftmost. Leaf indices are 0-based.

use crate::chart::{ChartError, ChartPoint, LeafGeometry, MetricSpec};
use crate::field::{FrameTensor, JetTensor, Variance};
use crate::jet::DEFAULT_ORDER;

use Variance::{Down, Up};

/// Curvature at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePack {
    /// `R̄^i_jkl`.
    pub rbar: FrameTensor,
    /// `A_ij = R^1_{i0j}`.
    pub a: FrameTensor,
    /// `B_ijk = R^1_{ijk}`.
    pub b: FrameTensor,
    /// `R^i_{j0k}`, slots `[i][j][k]`.
    pub r_i0k: FrameTensor,
    pub ric00: f64,
    pub ric0i: FrameTensor,
    pub ricij: FrameTensor,
    pub s: f64,
}

/// The independent slices of `∇R`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivPack {
    /// `Ã_ij = ∇_0 R^1_{i0j}`.
    pub atil: FrameTensor,
    /// `Â_sij = ∇_s R^1_{i0j}`.
    pub ahat: FrameTensor,
    /// `B̃_ijk = ∇_0 R^1_{ijk}`.
    pub btil: FrameTensor,
    /// `B̂_sijk = ∇_s R^1_{ijk}`.
    pub bhat: FrameTensor,
    /// `R̃^i_jkl = ∇_0 R^i_{jkl}`.
    pub rtil: FrameTensor,
    /// `∇̄_s R̄^i_jkl`, slots `[s][i][j][k][l]`.
    pub grad_rbar: FrameTensor,
}

pub const SECOND_BLOCK_NAMES: [&str; 12] = [
    "nabla_m nabla_s R^i_jkl",
    "nabla_0 nabla_s R^i_jkl",
    "nabla_s nabla_0 R^i_jkl",
    "nabla_0 nabla_0 R^i_jkl",
    "nabla_m nabla_s R^1_ijk",
    "nabla_0 nabla_s R^1_ijk",
    "nabla_s nabla_0 R^1_ijk",
    "nabla_0 nabla_0 R^1_ijk",
    "nabla_m nabla_s R^1_i0j",
    "nabla_0 nabla_s R^1_i0j",
    "nabla_s nabla_0 R^1_i0j",
    "nabla_0 nabla_0 R^1_i0j",
];

/// Index of the `∇_0∇_0 R^1_{i0j}` block, the one carrying `D₀Ã`.
pub const D0_ATIL_BLOCK: usize = 11;

/// The blocks of `∇∇R`, in the order of [`SECOND_BLOCK_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivPack {
    pub blocks: Vec<FrameTensor>,
}

impl CurvaturePack {
    pub fn blocks(&self) -> Vec<(&'static str, FrameTensor)> {
        let n = self.a.n();
        vec![
            ("Rbar^i_jkl", self.rbar.clone()),
            ("R^i_j0k", self.r_i0k.clone()),
            ("A", self.a.clone()),
            ("B", self.b.clone()),
            ("Ric_00", scalar(n, self.ric00)),
            ("Ric_0i", self.ric0i.clone()),
            ("Ric_ij", self.ricij.clone()),
            ("S", scalar(n, self.s)),
        ]
    }

    /// Max-norm over every block.
    pub fn max_abs(&self) -> f64 {
        self.blocks().iter().fold(0.0, |m, (_, t)| m.max(t.max_abs()))
    }
}

impl DerivPack {
    pub fn blocks(&self) -> Vec<(&'static str, FrameTensor)> {
        vec![
            ("Atil", self.atil.clone()),
            ("Ahat", self.ahat.clone()),
            ("Btil", self.btil.clone()),
            ("Bhat", self.bhat.clone()),
            ("Rtil", self.rtil.clone()),
            ("grad Rbar", self.grad_rbar.clone()),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks().iter().fold(0.0, |m, (_, t)| m.max(t.max_abs()))
    }
}

impl SecondDerivPack {
    pub fn named(&self) -> Vec<(&'static str, FrameTensor)> {
        SECOND_BLOCK_NAMES.iter().copied().zip(self.blocks.iter().cloned()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, t| m.max(t.max_abs()))
    }
}

pub(crate) fn scalar(n: usize, v: f64) -> FrameTensor {
    FrameTensor::leaf(n, &[], vec![v])
}

/// Everything the engine computed at one point, up to the requested depth.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub curvature: CurvaturePack,
    pub first: Option<DerivPack>,
    pub second: Option<SecondDerivPack>,
    /// Raw `∇̄_s Ã_ij` and `D₀Ã_ij` (depth 2 only).
    pub atil_derivs: Option<AtilDerivatives>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtilDerivatives {
    pub grad: FrameTensor,
    pub d0: FrameTensor,
}

/// Jet-level leaf tensors of the first curvature layer.
struct Layer1 {
    rbar: JetTensor,
    a: JetTensor,
    b: JetTensor,
}

struct Layer2 {
    atil: JetTensor,
    ahat: JetTensor,
    btil: JetTensor,
    bhat: JetTensor,
    rtil: JetTensor,
    grad_rbar: JetTensor,
}

/// Specialized curvature evaluation at one point.
pub struct Engine {
    geo: LeafGeometry,
}

impl Engine {
    pub fn new(spec: &MetricSpec, p: &ChartPoint, order: usize) -> Result<Engine, ChartError> {
        Ok(Engine { geo: LeafGeometry::new(spec, p, order)? })
    }

    pub fn geometry(&self) -> &LeafGeometry {
        &self.geo
    }

    fn layer1(&self) -> Layer1 {
        let g = &self.geo;
        let m = g.m;
        let dgam: Vec<JetTensor> = (0..m).map(|k| g.gamma.partial(k + 1)).collect();
        let rbar = JetTensor::from_fn(vec![Up, Down, Down, Down], m, |ix| {
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = dgam[k].at(&[i, j, l]) - dgam[l].at(&[i, j, k]);
            for r in 0..m {
                acc.add_product(1.0, g.gamma.at(&[i, k, r]), g.gamma.at(&[r, j, l]));
                acc.add_product(-1.0, g.gamma.at(&[i, l, r]), g.gamma.at(&[r, j, k]));
            }
            acc
        });
        let dh = g.cov(&g.h);
        let tdot = g.t.partial(0);
        let a = JetTensor::from_fn(vec![Down, Down], m, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = dh.at(&[j, i]) + tdot.at(&[i, j]);
            for k in 0..m {
                acc.add_product(1.0, g.t_mix.at(&[k, i]), g.t.at(&[k, j]));
            }
            -acc
        });
        let dt = g.cov(&g.t);
        let b = JetTensor::from_fn(vec![Down, Down, Down], m, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            dt.at(&[k, i, j]) - dt.at(&[j, i, k])
        });
        Layer1 { rbar, a, b }
    }

    fn curvature(&self, l1: &Layer1) -> CurvaturePack {
        let g = &self.geo;
        let (n, m) = (g.n, g.m);
        let dtm = g.cov(&g.t_mix);
        let r_i0k = FrameTensor::from_fn(n, crate::chart::leaf_slots(&[Up, Down, Down]), |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            dtm.at(&[k, i, j]).value() + g.gamma.at(&[i, j, k]).diff(0).value()
        });

        let ginv = |i: usize, j: usize| g.g_inv.at(&[i, j]).value();
        let tv = |i: usize, j: usize| g.t.at(&[i, j]).value();
        let tmv = |i: usize, j: usize| g.t_mix.at(&[i, j]).value();
        let dhup = g.cov(&g.h_up);
        let tdot = g.t.partial(0);
        let mut ric00 = 0.0;
        for i in 0..m {
            ric00 += dhup.at(&[i, i]).value();
            for j in 0..m {
                ric00 += ginv(i, j) * tdot.at(&[j, i]).value();
                // t^{ki} t_ki with t^{ki} = t^k_b g^{bi}
                let mut t_up = 0.0;
                for b in 0..m {
                    t_up += tmv(i, b) * ginv(b, j);
                }
                ric00 += t_up * tv(i, j);
            }
        }
        let ric0i = FrameTensor::from_fn(n, crate::chart::leaf_slots(&[Down]), |ix| {
            let i = ix[0];
            (0..m)
                .map(|j| dtm.at(&[i, j, j]).value() - dtm.at(&[j, j, i]).value())
                .sum()
        });
        let ricij = FrameTensor::from_fn(n, crate::chart::leaf_slots(&[Down, Down]), |ix| {
            (0..m).map(|k| l1.rbar.at(&[k, ix[0], k, ix[1]]).value()).sum()
        });
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += ginv(i, j) * ricij.get(&[i, j]);
            }
        }
        CurvaturePack {
            rbar: l1.rbar.values(n),
            a: l1.a.values(n),
            b: l1.b.values(n),
            r_i0k,
            ric00,
            ric0i,
            ricij,
            s,
        }
    }

    fn layer2(&self, l1: &Layer1) -> Layer2 {
        let g = &self.geo;
        let m = g.m;
        let (a, b, rbar) = (&l1.a, &l1.b, &l1.rbar);
        let d0a = g.d0(a);
        let da = g.cov(a);
        let d0b = g.d0(b);
        let db = g.cov(b);

        let atil = JetTensor::from_fn(vec![Down, Down], m, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = d0a.at(ix).clone();
            for k in 0..m {
                let sym = b.at(&[i, j, k]) + b.at(&[j, i, k]);
                acc.add_product(1.0, g.h_up.at(&[k]), &sym);
            }
            acc
        });
        let ahat = JetTensor::from_fn(vec![Down, Down, Down], m, |ix| {
            let (s, i, j) = (ix[0], ix[1], ix[2]);
            let mut acc = da.at(ix).clone();
            for k in 0..m {
                let sym = b.at(&[i, j, k]) + b.at(&[j, i, k]);
                acc.add_product(-1.0, g.t_mix.at(&[k, s]), &sym);
            }
            acc
        });
        let btil = JetTensor::from_fn(vec![Down, Down, Down], m, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            let mut acc = d0b.at(ix).clone();
            for r in 0..m {
                acc.add_product(1.0, g.h.at(&[r]), rbar.at(&[r, i, j, k]));
            }
            acc
        });
        let bhat = JetTensor::from_fn(vec![Down, Down, Down, Down], m, |ix| {
            let (s, i, j, k) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = db.at(ix).clone();
            for r in 0..m {
                acc.add_product(-1.0, g.t.at(&[r, s]), rbar.at(&[r, i, j, k]));
            }
            acc
        });
        let rtil = g.d0(rbar);
        let grad_rbar = g.cov(rbar);
        Layer2 { atil, ahat, btil, bhat, rtil, grad_rbar }
    }

    fn atil_derivs(&self, l2: &Layer2) -> AtilDerivatives {
        let n = self.geo.n;
        AtilDerivatives { grad: self.geo.cov(&l2.atil).values(n), d0: self.geo.d0(&l2.atil).values(n) }
    }

    /// `∂_u² A_ij` at the point; needs jet order at least 4.
    pub fn a_second_u_derivative(&self) -> FrameTensor {
        let l1 = self.layer1();
        l1.a.map(|j| j.diff(0).diff(0)).values(self.geo.n)
    }

    fn layer3(&self, l2: &Layer2) -> SecondDerivPack {
        let g = &self.geo;
        let (n, m) = (g.n, g.m);
        let gr = &l2.grad_rbar;
        let vals = |t: JetTensor| t.values(n);
        let mut blocks = Vec::with_capacity(12);

        // R^i_jkl
        blocks.push(vals(g.cov(gr)));
        blocks.push(vals(g.d0(gr)));
        let dr = g.cov(&l2.rtil);
        blocks.push(vals(JetTensor::from_fn(dr.variance().to_vec(), m, |ix| {
            let s = ix[0];
            let mut acc = dr.at(ix).clone();
            for r in 0..m {
                let mut jx = ix.to_vec();
                jx[0] = r;
                acc.add_product(1.0, g.t_mix.at(&[r, s]), gr.at(&jx));
            }
            acc
        })));
        let d0r = g.d0(&l2.rtil);
        blocks.push(vals(JetTensor::from_fn(d0r.variance().to_vec(), m, |ix| {
            let mut acc = d0r.at(ix).clone();
            let mut jx = vec![0; 5];
            jx[1..].copy_from_slice(ix);
            for r in 0..m {
                jx[0] = r;
                acc.add_product(-1.0, g.h_up.at(&[r]), gr.at(&jx));
            }
            acc
        })));

        // R^1_ijk
        let dbh = g.cov(&l2.bhat);
        blocks.push(vals(JetTensor::from_fn(dbh.variance().to_vec(), m, |ix| {
            let (mm, s, i, j, k) = (ix[0], ix[1], ix[2], ix[3], ix[4]);
            let mut acc = dbh.at(ix).clone();
            for r in 0..m {
                acc.add_product(-1.0, g.t.at(&[r, mm]), gr.at(&[s, r, i, j, k]));
            }
            acc
        })));
        let d0bh = g.d0(&l2.bhat);
        blocks.push(vals(JetTensor::from_fn(d0bh.variance().to_vec(), m, |ix| {
            let (s, i, j, k) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = d0bh.at(ix).clone();
            for r in 0..m {
                acc.add_product(1.0, g.h.at(&[r]), gr.at(&[s, r, i, j, k]));
            }
            acc
        })));
        let dbt = g.cov(&l2.btil);
        blocks.push(vals(JetTensor::from_fn(dbt.variance().to_vec(), m, |ix| {
            let (s, i, j, k) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = dbt.at(ix).clone();
            for r in 0..m {
                acc.add_product(-1.0, g.t.at(&[r, s]), l2.rtil.at(&[r, i, j, k]));
                acc.add_product(1.0, g.t_mix.at(&[r, s]), l2.bhat.at(&[r, i, j, k]));
            }
            acc
        })));
        let d0bt = g.d0(&l2.btil);
        blocks.push(vals(JetTensor::from_fn(d0bt.variance().to_vec(), m, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            let mut acc = d0bt.at(ix).clone();
            for r in 0..m {
                acc.add_product(1.0, g.h.at(&[r]), l2.rtil.at(&[r, i, j, k]));
                acc.add_product(-1.0, g.h_up.at(&[r]), l2.bhat.at(&[r, i, j, k]));
            }
            acc
        })));

        // R^1_i0j
        let dah = g.cov(&l2.ahat);
        blocks.push(vals(JetTensor::from_fn(dah.variance().to_vec(), m, |ix| {
            let (mm, s, i, j) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = dah.at(ix).clone();
            for r in 0..m {
                let sym = l2.bhat.at(&[s, i, j, r]) + l2.bhat.at(&[s, j, i, r]);
                acc.add_product(-1.0, g.t_mix.at(&[r, mm]), &sym);
            }
            acc
        })));
        let d0ah = g.d0(&l2.ahat);
        blocks.push(vals(JetTensor::from_fn(d0ah.variance().to_vec(), m, |ix| {
            let (s, i, j) = (ix[0], ix[1], ix[2]);
            let mut acc = d0ah.at(ix).clone();
            for r in 0..m {
                let sym = l2.bhat.at(&[s, i, j, r]) + l2.bhat.at(&[s, j, i, r]);
                acc.add_product(1.0, g.h_up.at(&[r]), &sym);
            }
            acc
        })));
        let dat = g.cov(&l2.atil);
        blocks.push(vals(JetTensor::from_fn(dat.variance().to_vec(), m, |ix| {
            let (s, i, j) = (ix[0], ix[1], ix[2]);
            let mut acc = dat.at(ix).clone();
            for r in 0..m {
                let sym = l2.btil.at(&[i, j, r]) + l2.btil.at(&[j, i, r]);
                acc.add_product(-1.0, g.t_mix.at(&[r, s]), &sym);
                acc.add_product(1.0, g.t_mix.at(&[r, s]), l2.ahat.at(&[r, i, j]));
            }
            acc
        })));
        let d0at = g.d0(&l2.atil);
        blocks.push(vals(JetTensor::from_fn(d0at.variance().to_vec(), m, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = d0at.at(ix).clone();
            for r in 0..m {
                let sym = l2.btil.at(&[i, j, r]) + l2.btil.at(&[j, i, r]);
                acc.add_product(1.0, g.h_up.at(&[r]), &sym);
                acc.add_product(-1.0, g.h_up.at(&[r]), l2.ahat.at(&[r, i, j]));
            }
            acc
        })));
        SecondDerivPack { blocks }
    }

    /// Runs the pipeline to `depth` (0: curvature, 1: `∇R`, 2: `∇∇R`).
    pub fn run(&self, depth: usize) -> EngineOutput {
        let l1 = self.layer1();
        let curvature = self.curvature(&l1);
        if depth == 0 {
            return EngineOutput { curvature, first: None, second: None, atil_derivs: None };
        }
        let l2 = self.layer2(&l1);
        let n = self.geo.n;
        let first = DerivPack {
            atil: l2.atil.values(n),
            ahat: l2.ahat.values(n),
            btil: l2.btil.values(n),
            bhat: l2.bhat.values(n),
            rtil: l2.rtil.values(n),
            grad_rbar: l2.grad_rbar.values(n),
        };
        let (second, atil_derivs) = if depth >= 2 {
            (Some(self.layer3(&l2)), Some(self.atil_derivs(&l2)))
        } else {
            (None, None)
        };
        EngineOutput { curvature, first: Some(first), second, atil_derivs }
    }
}

/// Minimum jet order for a pipeline depth.
pub fn required_order(depth: usize) -> usize {
    2 + depth
}

fn check_order(order: usize, depth: usize) -> Result<(), ChartError> {
    if order < required_order(depth) {
        return Err(ChartError::Count { what: "jet order", expected: required_order(depth), got: order });
    }
    Ok(())
}

/// Full pipeline at the default jet order.
pub fn analyze(spec: &MetricSpec, p: &ChartPoint, depth: usize) -> Result<EngineOutput, ChartError> {
    analyze_with_order(spec, p, depth, DEFAULT_ORDER)
}

pub fn analyze_with_order(
    spec: &MetricSpec,
    p: &ChartPoint,
    depth: usize,
    order: usize,
) -> Result<EngineOutput, ChartError> {
    check_order(order, depth)?;
    Ok(Engine::new(spec, p, order)?.run(depth))
}

pub fn curvature_components(spec: &MetricSpec, p: &ChartPoint) -> Result<CurvaturePack, ChartError> {
    Ok(analyze_with_order(spec, p, 0, required_order(0))?.curvature)
}

pub fn nabla_r_components(spec: &MetricSpec, p: &ChartPoint) -> Result<DerivPack, ChartError> {
    Ok(analyze_with_order(spec, p, 1, required_order(1))?.first.expect("depth 1 computed"))
}

pub fn nabla2_r_components(spec: &MetricSpec, p: &ChartPoint) -> Result<SecondDerivPack, ChartError> {
    Ok(analyze_with_order(spec, p, 2, required_order(2))?.second.expect("depth 2 computed"))
}

/// Leaf Riemann tensor with its first two leaf covariant derivatives.
pub fn riemann_bar(
    spec: &MetricSpec,
    p: &ChartPoint,
) -> Result<(FrameTensor, FrameTensor, FrameTensor), ChartError> {
    let e = Engine::new(spec, p, 4)?;
    let l1 = e.layer1();
    let n = spec.n();
    let d = e.geo.cov(&l1.rbar);
    let dd = e.geo.cov(&d);
    Ok((l1.rbar.values(n), d.values(n), dd.values(n)))
}

/// `D₀T` for a leaf tensor given its value, u-derivative and `t^i_j`.
pub fn d0_apply(t: &FrameTensor, t_mix: &FrameTensor, t_dot: &FrameTensor) -> Result<FrameTensor, ChartError> {
    if t.slots() != t_dot.slots() {
        return Err(ChartError::Count { what: "slots in the u-derivative", expected: t.rank(), got: t_dot.rank() });
    }
    let dims = t.dims();
    let m = t_mix.dims().first().copied().unwrap_or(0);
    if t_mix.rank() != 2 || dims.iter().any(|&d| d != m) {
        return Err(ChartError::Count { what: "leaf slots", expected: m, got: dims.first().copied().unwrap_or(0) });
    }
    let variance: Vec<Variance> = t.slots().iter().map(|s| s.0).collect();
    Ok(FrameTensor::from_fn(t.n(), t.slots().to_vec(), |ix| {
        let mut acc = t_dot.get(ix);
        let mut j = ix.to_vec();
        for (a, var) in variance.iter().enumerate() {
            for k in 0..m {
                j[a] = k;
                match var {
                    Up => acc -= t_mix.get(&[ix[a], k]) * t.get(&j),
                    Down => acc += t_mix.get(&[k, ix[a]]) * t.get(&j),
                }
            }
            j[a] = ix[a];
        }
        acc
    }))
}
