//! Symmetry order, structural checks, `Ã` extraction and the Ricci
//! eigen-split of the leaves.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chart::{ChartError, ChartPoint, MetricSpec};
use crate::curvature::{analyze, EngineOutput, SECOND_BLOCK_NAMES};
use crate::expr::Expr;
use crate::field::FrameTensor;
use crate::oracle::{compare, oracle_packs, OracleError};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DETECTION_FLOOR: f64 = 1e-3;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;
/// Engine and oracle must agree to this relative deviation.
pub const ENGINE_ORACLE_TOL: f64 = 1e-6;
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} lies outside the admissible box")]
    OutsideDomain(String),
    #[error("engine and oracle disagree on {block} at {point}: relative deviation {dev:e}")]
    Disagreement { block: String, point: String, dev: f64 },
    #[error("symmetric eigen-solver failed: {0}")]
    Eigen(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Flat,
    LocallySymmetric,
    ProperSecondSymmetric,
    NotSecondSymmetric,
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Flat => "flat",
            Verdict::LocallySymmetric => "locally_symmetric",
            Verdict::ProperSecondSymmetric => "proper_second_symmetric",
            Verdict::NotSecondSymmetric => "not_second_symmetric",
            Verdict::Undetermined => "undetermined",
        }
    }

    /// Flat, locally symmetric and proper 2nd-symmetric all have `∇∇R = 0`.
    pub fn second_symmetric(self) -> bool {
        matches!(self, Verdict::Flat | Verdict::LocallySymmetric | Verdict::ProperSecondSymmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Zero,
    Gray,
    Nonzero,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Zero => "zero",
            Level::Gray => "gray",
            Level::Nonzero => "nonzero",
        }
    }
}

/// Zero below `tol`, nonzero above `max(100·tol, floor)`, gray between.
pub fn level(scaled: f64, tol: f64) -> Level {
    if scaled < tol {
        Level::Zero
    } else if scaled > (100.0 * tol).max(DETECTION_FLOOR) {
        Level::Nonzero
    } else {
        Level::Gray
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    /// Max-norm over samples and both engines.
    pub raw: f64,
    /// Max over samples of `raw / (1 + ‖CurvaturePack‖)`.
    pub scaled: f64,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub verdict: Verdict,
    pub depth: usize,
    pub tol: f64,
    pub samples: Vec<ChartPoint>,
    /// `R`, `∇R` and (at depth 2) `∇∇R`.
    pub residuals: Vec<Residual>,
    pub first_blocks: Vec<Residual>,
    pub second_blocks: Vec<Residual>,
    pub engine_oracle_max_dev: f64,
    /// `Ã_ij` per sample.
    pub atil: Vec<FrameTensor>,
}

impl SymmetryReport {
    /// Names of the nonvanishing `∇∇R` blocks.
    pub fn nonzero_second_blocks(&self) -> Vec<&str> {
        self.second_blocks.iter().filter(|r| r.level != Level::Zero).map(|r| r.name.as_str()).collect()
    }
}

/// Engine output at every sample, checked against the oracle.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<ChartPoint>,
    pub engine: Vec<EngineOutput>,
    pub oracle_norms: Vec<OracleNorms>,
    pub max_dev: f64,
}

#[derive(Debug, Clone, Default)]
pub struct OracleNorms {
    pub curvature: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

pub fn check_samples(spec: &MetricSpec, samples: &[ChartPoint]) -> Result<(), ClassifyError> {
    if samples.len() < MIN_SAMPLES {
        return Err(ClassifyError::TooFewSamples(samples.len()));
    }
    if let Some(p) = samples.iter().find(|p| !spec.contains(p)) {
        return Err(ClassifyError::OutsideDomain(p.to_string()));
    }
    Ok(())
}

/// Runs both engines at every sample and aborts on disagreement.
pub fn evaluate(spec: &MetricSpec, samples: &[ChartPoint], depth: usize) -> Result<SampleSet, ClassifyError> {
    let mut engine = Vec::with_capacity(samples.len());
    let mut norms = Vec::with_capacity(samples.len());
    let mut max_dev: f64 = 0.0;
    for p in samples {
        let e = analyze(spec, p, depth)?;
        let o = oracle_packs(spec, p, depth)?;
        for d in compare(&e, &o) {
            max_dev = max_dev.max(d.rel);
            if !(d.rel <= ENGINE_ORACLE_TOL) {
                return Err(ClassifyError::Disagreement { block: d.name.to_string(), point: p.to_string(), dev: d.rel });
            }
        }
        norms.push(OracleNorms {
            curvature: o.curvature.max_abs(),
            first: o.first.iter().flat_map(|f| f.blocks().into_iter().map(|(_, t)| t.max_abs())).collect(),
            second: o.second.iter().flat_map(|s| s.blocks.iter().map(|t| t.max_abs())).collect(),
        });
        engine.push(e);
    }
    Ok(SampleSet { samples: samples.to_vec(), engine, oracle_norms: norms, max_dev })
}

struct Acc {
    name: String,
    raw: f64,
    scaled: f64,
}

impl Acc {
    fn new(name: &str) -> Acc {
        Acc { name: name.to_string(), raw: 0.0, scaled: 0.0 }
    }

    fn push(&mut self, v: f64, scale: f64) {
        self.raw = self.raw.max(v);
        self.scaled = self.scaled.max(v / scale);
    }

    fn finish(self, tol: f64) -> Residual {
        let level = level(self.scaled, tol);
        Residual { name: self.name, raw: self.raw, scaled: self.scaled, level }
    }
}

/// Classifies by the vanishing pattern of `R`, `∇R`, `∇∇R` over the samples.
/// `depth` is 1 or 2; at depth 1 a nonzero `∇R` is undetermined.
pub fn symmetry_order(
    spec: &MetricSpec,
    samples: &[ChartPoint],
    tol: f64,
    depth: usize,
) -> Result<SymmetryReport, ClassifyError> {
    check_samples(spec, samples)?;
    let depth = depth.clamp(1, 2);
    let set = evaluate(spec, samples, depth)?;
    Ok(report_from(&set, tol, depth))
}

pub fn report_from(set: &SampleSet, tol: f64, depth: usize) -> SymmetryReport {
    let mut r = Acc::new("R");
    let mut d1 = Acc::new("nabla R");
    let mut d2 = Acc::new("nabla nabla R");
    let first_names = ["Atil", "Ahat", "Btil", "Bhat", "Rtil", "grad Rbar"];
    let mut firsts: Vec<Acc> = first_names.iter().map(|n| Acc::new(n)).collect();
    let mut seconds: Vec<Acc> = SECOND_BLOCK_NAMES.iter().map(|n| Acc::new(n)).collect();
    let mut atil = Vec::new();
    for (e, o) in set.engine.iter().zip(&set.oracle_norms) {
        let c = e.curvature.max_abs().max(o.curvature);
        let scale = 1.0 + c;
        // R is judged on its absolute size.
        r.push(c, 1.0);
        if let Some(f) = &e.first {
            for (k, (_, t)) in f.blocks().iter().enumerate() {
                let v = t.max_abs().max(o.first.get(k).copied().unwrap_or(0.0));
                firsts[k].push(v, scale);
                d1.push(v, scale);
            }
            atil.push(f.atil.clone());
        }
        if let Some(s) = &e.second {
            for (k, t) in s.blocks.iter().enumerate() {
                let v = t.max_abs().max(o.second.get(k).copied().unwrap_or(0.0));
                seconds[k].push(v, scale);
                d2.push(v, scale);
            }
        }
    }
    let mut residuals = vec![r.finish(tol), d1.finish(tol)];
    if depth >= 2 {
        residuals.push(d2.finish(tol));
    }
    let verdict = decide(&residuals);
    SymmetryReport {
        verdict,
        depth,
        tol,
        samples: set.samples.clone(),
        residuals,
        first_blocks: firsts.into_iter().map(|a| a.finish(tol)).collect(),
        second_blocks: if depth >= 2 { seconds.into_iter().map(|a| a.finish(tol)).collect() } else { Vec::new() },
        engine_oracle_max_dev: set.max_dev,
        atil,
    }
}

fn decide(res: &[Residual]) -> Verdict {
    match res[0].level {
        Level::Zero => return Verdict::Flat,
        Level::Gray => return Verdict::Undetermined,
        Level::Nonzero => {}
    }
    match res[1].level {
        Level::Zero => return Verdict::LocallySymmetric,
        Level::Gray => return Verdict::Undetermined,
        Level::Nonzero => {}
    }
    match res.get(2).map(|r| r.level) {
        Some(Level::Zero) => Verdict::ProperSecondSymmetric,
        Some(Level::Nonzero) => Verdict::NotSecondSymmetric,
        _ => Verdict::Undetermined,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub residual: f64,
}

/// The consequences of 2nd-symmetry on the leaf data.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralChecks {
    pub checks: Vec<Check>,
    pub s_values: Vec<f64>,
    /// `∇∇R` vanished at every sample, so the checks are meaningful.
    pub within_hypothesis: bool,
}

impl StructuralChecks {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn check_theorem_redu(
    spec: &MetricSpec,
    samples: &[ChartPoint],
    tol: f64,
) -> Result<StructuralChecks, ClassifyError> {
    check_samples(spec, samples)?;
    let set = evaluate(spec, samples, 2)?;
    Ok(structural_from(&set, tol))
}

pub fn structural_from(set: &SampleSet, tol: f64) -> StructuralChecks {
    let mut worst = [0.0f64; 6];
    let mut s_values = Vec::new();
    let mut second: f64 = 0.0;
    for e in &set.engine {
        let scale = 1.0 + e.curvature.max_abs();
        let f = e.first.as_ref().expect("depth 2");
        let a = e.atil_derivs.as_ref().expect("depth 2");
        let vals = [
            f.grad_rbar.max_abs(),
            f.bhat.max_abs(),
            f.rtil.max_abs(),
            f.ahat.max_abs(),
            f.btil.max_abs(),
            a.grad.max_abs().max(a.d0.max_abs()),
        ];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v / scale);
        }
        second = second.max(e.second.as_ref().expect("depth 2").max_abs() / scale);
        s_values.push(e.curvature.s);
    }
    let names = [
        "leaf_locally_symmetric",
        "bhat_zero",
        "rtil_zero",
        "ahat_zero",
        "btil_zero",
        "atil_parallel",
    ];
    let mut checks: Vec<Check> = names
        .iter()
        .zip(worst)
        .map(|(&name, r)| Check { name, pass: r < tol, residual: r })
        .collect();
    let smax = s_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let smin = s_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = smax - smin;
    let s_scale = 1.0 + smax.abs().max(smin.abs());
    checks.push(Check { name: "s_constant", pass: spread < tol * s_scale, residual: spread });
    StructuralChecks { checks, s_values, within_hypothesis: second < tol }
}

/// Cholesky-reduced eigenproblem `Ric v = μ ḡ v`. Returns ascending
/// eigenvalues and ḡ-orthonormal eigenvectors (columns, coordinate
/// components).
pub fn generalized_eigen(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), ClassifyError> {
    let m = a.nrows();
    if m == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let l = g.clone().cholesky().ok_or_else(|| ClassifyError::Eigen("leaf metric not positive definite".into()))?.l();
    let l_inv = l.clone().try_inverse().ok_or_else(|| ClassifyError::Eigen("singular Cholesky factor".into()))?;
    let mut c = &l_inv * a * l_inv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, 1e-15, 10_000).ok_or_else(|| ClassifyError::Eigen("no convergence".into()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(m, m, |r, k| eig.eigenvectors[(r, order[k])]);
    let v = l_inv.transpose() * y;
    Ok((values, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtilReport {
    pub values: Vec<FrameTensor>,
    /// Ascending ḡ-eigenvalues of `Ã` per sample.
    pub eigenvalues: Vec<Vec<f64>>,
    pub grad_residual: f64,
    pub d0_residual: f64,
    pub grad_zero: bool,
    pub d0_zero: bool,
    /// Only on canonical CW charts (`W = 0`, `g = δ`): `max |∂²_u A|`.
    pub affine_residual: Option<f64>,
}

fn canonical_cw_chart(spec: &MetricSpec) -> bool {
    let m = spec.m();
    spec.w().iter().all(Expr::is_zero)
        && (0..m).all(|i| {
            (0..m).all(|j| matches!(spec.g()[i][j], Expr::Num(v) if v == if i == j { 1.0 } else { 0.0 }))
        })
}

pub fn extract_a_tilde(spec: &MetricSpec, samples: &[ChartPoint], tol: f64) -> Result<AtilReport, ClassifyError> {
    let mut values = Vec::new();
    let mut eigenvalues = Vec::new();
    let (mut gr, mut dr) = (0.0f64, 0.0f64);
    let canonical = canonical_cw_chart(spec);
    let mut affine: f64 = 0.0;
    for p in samples {
        let engine = crate::curvature::Engine::new(spec, p, crate::jet::DEFAULT_ORDER)?;
        let e = engine.run(2);
        let scale = 1.0 + e.curvature.max_abs();
        let atil = e.first.as_ref().expect("depth 2").atil.clone();
        let g = spec.leaf_metric_at(p)?;
        eigenvalues.push(generalized_eigen(&atil.to_matrix(), &g)?.0);
        let d = e.atil_derivs.as_ref().expect("depth 2");
        gr = gr.max(d.grad.max_abs() / scale);
        dr = dr.max(d.d0.max_abs() / scale);
        if canonical {
            affine = affine.max(engine.a_second_u_derivative().max_abs() / scale);
        }
        values.push(atil);
    }
    Ok(AtilReport {
        values,
        eigenvalues,
        grad_residual: gr,
        d0_residual: dr,
        grad_zero: gr < tol,
        d0_zero: dr < tol,
        affine_residual: canonical.then_some(affine),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
    /// Printed leaf labels (`2, 3, ...`) assigned to this cluster.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EisenhartSplit {
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Labels in the zero-eigenvalue (flat) cluster.
    pub flat_block: Vec<usize>,
    /// Label sets of the remaining clusters.
    pub curved_blocks: Vec<Vec<usize>>,
    /// ḡ-orthonormal eigenvectors, columns in coordinate components.
    pub basis: DMatrix<f64>,
    /// Two clusters closer than `10·cluster_tol`.
    pub ambiguous: bool,
    /// Max projector leakage: how far the index assignment is from a
    /// coordinate-aligned split.
    pub alignment_defect: f64,
    /// `max |Ã_ab|` in the eigenbasis with `a` or `b` off the flat cluster.
    pub atil_off_flat: f64,
    /// `max |Ric − Σ_m μ_m ḡ^{(m)}|` on the coordinate blocks.
    pub blockwise_residual: f64,
}

pub fn eisenhart_split(spec: &MetricSpec, p: &ChartPoint, cluster_tol: f64) -> Result<EisenhartSplit, ClassifyError> {
    let m = spec.m();
    let e = analyze(spec, p, 1)?;
    let g = spec.leaf_metric_at(p)?;
    let ric = e.curvature.ricij.to_matrix();
    let (values, basis) = generalized_eigen(&ric, &g)?;

    // consecutive clustering
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut ambiguous = false;
    for k in 0..m {
        if k > 0 {
            let gap = values[k] - values[k - 1];
            if gap <= cluster_tol {
                groups.last_mut().unwrap().push(k);
                continue;
            }
            if gap <= 10.0 * cluster_tol {
                ambiguous = true;
            }
        }
        groups.push(vec![k]);
    }

    // projector diagonals P^i_i = Σ_{k in cluster} v_i^k (ḡ v^k)_i
    let gv = &g * &basis;
    let mut owner = vec![0usize; m];
    let mut defect: f64 = 0.0;
    for i in 0..m {
        let weights: Vec<f64> = groups
            .iter()
            .map(|grp| grp.iter().map(|&k| basis[(i, k)] * gv[(i, k)]).sum())
            .collect();
        let (best, w) = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(c, w)| (c, *w))
            .unwrap_or((0, 1.0));
        owner[i] = best;
        defect = defect.max((1.0 - w).abs());
    }
    let clusters: Vec<Cluster> = groups
        .iter()
        .enumerate()
        .map(|(c, grp)| Cluster {
            value: grp.iter().map(|&k| values[k]).sum::<f64>() / grp.len() as f64,
            multiplicity: grp.len(),
            indices: (0..m).filter(|&i| owner[i] == c).map(|i| i + 2).collect(),
        })
        .collect();
    let flat = clusters.iter().position(|c| c.value.abs() <= cluster_tol);
    let flat_block = flat.map(|c| clusters[c].indices.clone()).unwrap_or_default();
    let curved_blocks = clusters
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != flat)
        .map(|(_, cl)| cl.indices.clone())
        .collect();

    let atil = e.first.as_ref().expect("depth 1").atil.to_matrix();
    let at_eig = basis.transpose() * &atil * &basis;
    let in_flat = |k: usize| flat.is_some_and(|c| groups[c].contains(&k));
    let mut off: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            if !(in_flat(a) && in_flat(b)) {
                off = off.max(at_eig[(a, b)].abs());
            }
        }
    }
    let mut blockwise: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let expect = if owner[i] == owner[j] { clusters[owner[i]].value * g[(i, j)] } else { 0.0 };
            blockwise = blockwise.max((ric[(i, j)] - expect).abs());
        }
    }
    Ok(EisenhartSplit {
        eigenvalues: values,
        clusters,
        flat_block,
        curved_blocks,
        basis,
        ambiguous,
        alignment_defect: defect,
        atil_off_flat: off,
        blockwise_residual: blockwise,
    })
}

/// Largest spread of each eigenvalue across samples.
pub fn eigenvalue_spread(splits: &[EisenhartSplit]) -> f64 {
    let Some(first) = splits.first() else { return 0.0 };
    (0..first.eigenvalues.len())
        .map(|k| {
            let vals = splits.iter().map(|s| s.eigenvalues[k]);
            let hi = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeStats {
    pub dim: usize,
    pub trials: usize,
    /// Number of nonzero samples on which the contraction hypothesis held.
    pub hypothesis_holds: usize,
    /// Smallest normalized hypothesis residual over nonzero samples.
    pub min_residual: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub three_index: ProbeStats,
    pub four_index: ProbeStats,
    /// The zero tensor satisfies the hypothesis and the conclusion.
    pub zero_passes: bool,
    /// Tensors `b_ij v_k − b_ik v_j` with `b` symmetric and `b·v = 0`:
    /// smallest `‖b_j^r b_rn‖ / ‖b‖²` and smallest hypothesis residual.
    pub split_min_bb: f64,
    pub split_min_residual: f64,
}

impl ProbeReport {
    pub fn pass(&self) -> bool {
        self.zero_passes
            && self.three_index.hypothesis_holds == 0
            && self.four_index.hypothesis_holds == 0
            && self.three_index.min_residual > 0.0
            && self.four_index.min_residual > 0.0
            && self.split_min_residual > 0.0
    }
}

/// Random 3-tensor skew in the last pair with vanishing cyclic sum.
pub fn random_lemma_tensor3(l: usize, rng: &mut impl Rng) -> Vec<f64> {
    let x: Vec<f64> = (0..l * l * l).map(|_| rng.random_range(-1.0..1.0)).collect();
    let at = |i: usize, j: usize, k: usize| x[(i * l + j) * l + k];
    let skew = |i: usize, j: usize, k: usize| 0.5 * (at(i, j, k) - at(i, k, j));
    let mut t = vec![0.0; l * l * l];
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                let cyc = skew(i, j, k) + skew(j, k, i) + skew(k, i, j);
                t[(i * l + j) * l + k] = skew(i, j, k) - cyc / 3.0;
            }
        }
    }
    t
}

/// `max |T_(ij)^r T_rnm| / ‖T‖²` with the Euclidean inner product.
pub fn hypothesis3(t: &[f64], l: usize) -> f64 {
    let at = |i: usize, j: usize, k: usize| t[(i * l + j) * l + k];
    let norm = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..l {
        for j in i..l {
            for n in 0..l {
                for mm in 0..l {
                    let s: f64 = (0..l).map(|r| 0.5 * (at(i, j, r) + at(j, i, r)) * at(r, n, mm)).sum();
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst / (norm * norm)
}

/// Random 4-tensor skew in the last pair, cyclic over the last three.
pub fn random_lemma_tensor4(l: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut t = Vec::with_capacity(l.pow(4));
    for _ in 0..l {
        t.extend(random_lemma_tensor3(l, rng));
    }
    t
}

/// `max |T_{s(ij)}^r T_{lrnm}| / ‖T‖²`.
pub fn hypothesis4(t: &[f64], l: usize) -> f64 {
    let at = |s: usize, i: usize, j: usize, k: usize| t[((s * l + i) * l + j) * l + k];
    let norm = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for s in 0..l {
        for i in 0..l {
            for j in i..l {
                for ll in 0..l {
                    for n in 0..l {
                        for mm in 0..l {
                            let v: f64 = (0..l)
                                .map(|r| 0.5 * (at(s, i, j, r) + at(s, j, i, r)) * at(ll, r, n, mm))
                                .sum();
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
        }
    }
    worst / (norm * norm)
}

fn stats(dim: usize, trials: usize, residuals: impl Iterator<Item = f64>) -> ProbeStats {
    let mut s = ProbeStats { dim, trials, hypothesis_holds: 0, min_residual: f64::INFINITY, max_residual: 0.0 };
    for r in residuals {
        if r <= 1e-14 {
            s.hypothesis_holds += 1;
        }
        s.min_residual = s.min_residual.min(r);
        s.max_residual = s.max_residual.max(r);
    }
    s
}

/// Falsification suite for the contraction lemma on random tensors.
pub fn algebra_lemma_probe(dim: usize, trials: usize, seed: u64) -> ProbeReport {
    assert!((2..=6).contains(&dim), "dimension must be in 2..=6");
    let l = dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let three = stats(l, trials, (0..trials).map(|_| hypothesis3(&random_lemma_tensor3(l, &mut rng), l)));
    let four_trials = (trials / 10).max(1);
    let four = stats(l, four_trials, (0..four_trials).map(|_| hypothesis4(&random_lemma_tensor4(l, &mut rng), l)));
    let zero = vec![0.0; l * l * l];
    let zero_passes = hypothesis3(&zero, l) == 0.0 && zero.iter().all(|&v| v == 0.0);

    let (mut min_bb, mut min_res) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..(trials / 10).max(1) {
        let (t, bb) = split_tensor(l, &mut rng);
        min_bb = min_bb.min(bb);
        min_res = min_res.min(hypothesis3(&t, l));
    }
    ProbeReport { three_index: three, four_index: four, zero_passes, split_min_bb: min_bb, split_min_residual: min_res }
}

/// `T_ijk = b_ij v_k − b_ik v_j` for a random unit `v` and a random
/// symmetric `b` with `b·v = 0`. Returns `T` and `‖b_j^r b_rn‖ / ‖b‖²`.
fn split_tensor(l: usize, rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let mut v: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let x = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
    let sym = (&x + x.transpose()) * 0.5;
    let proj = DMatrix::identity(l, l) - DMatrix::from_fn(l, l, |i, j| v[i] * v[j]);
    let b = &proj * sym * &proj;
    let mut t = vec![0.0; l * l * l];
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                t[(i * l + j) * l + k] = b[(i, j)] * v[k] - b[(i, k)] * v[j];
            }
        }
    }
    let bmax = b.abs().max();
    let bb = (&b * &b).abs().max() / (bmax * bmax);
    (t, bb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        assert_eq!(level(1e-12, 1e-9), Level::Zero);
        assert_eq!(level(1e-8, 1e-9), Level::Gray);
        assert_eq!(level(2e-3, 1e-9), Level::Nonzero);
        assert_eq!(level(1e-2, 1e-3), Level::Gray);
    }

    #[test]
    fn generated_tensors_have_the_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = 4;
        let t = random_lemma_tensor3(l, &mut rng);
        let at = |i: usize, j: usize, k: usize| t[(i * l + j) * l + k];
        for i in 0..l {
            for j in 0..l {
                for k in 0..l {
                    assert!((at(i, j, k) + at(i, k, j)).abs() < 1e-15);
                    assert!((at(i, j, k) + at(j, k, i) + at(k, i, j)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn generalized_eigen_is_g_orthonormal() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, v) = generalized_eigen(&a, &g).unwrap();
        let gram = v.transpose() * &g * &v;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        for (k, mu) in vals.iter().enumerate() {
            let col = v.column(k);
            assert!((&a * col - (&g * col) * *mu).abs().max() < 1e-12);
        }
    }
}
