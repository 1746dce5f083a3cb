use brinkmann::canonical::{self, CanonicalError, CanonicalOptions, FlatBlockData};
use brinkmann::classify::{
    self, eigenvalue_spread, eisenhart_split, extract_a_tilde, report_from, structural_from, ClassifyError, Residual,
    Verdict, DEFAULT_CLUSTER_TOL,
};
use brinkmann::curvature::{analyze, EngineOutput};
use brinkmann::oracle::{compare, oracle_packs};
use brinkmann::sampling::default_samples;
use brinkmann::spaces::SpaceError;
use brinkmann::transport::{self, TransportError};
use brinkmann::{ChartPoint, MetricSpec};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::metric_file::MetricFileError;
use crate::output::{Table, SCHEMA_VERSION};

pub const ORACLE_DIFF_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    MetricFile(#[from] MetricFileError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub tol: f64,
    pub samples: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { tol: classify::DEFAULT_TOL, samples: 9, depth: 2, seed: 0 }
    }
}

impl SampleOptions {
    pub fn points(&self, spec: &MetricSpec) -> Vec<ChartPoint> {
        default_samples(spec.domain(), self.samples, self.seed)
    }
}

#[derive(Debug, Serialize)]
pub struct ResidualOut {
    pub name: String,
    pub raw: f64,
    pub scaled: f64,
    pub level: &'static str,
}

impl From<&Residual> for ResidualOut {
    fn from(r: &Residual) -> Self {
        ResidualOut { name: r.name.clone(), raw: r.raw, scaled: r.scaled, level: r.level.as_str() }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckOut {
    pub name: &'static str,
    pub pass: bool,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct TheoremOut {
    pub within_hypothesis: bool,
    pub checks: Vec<CheckOut>,
    pub s_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct AtilOut {
    pub eigenvalues: Vec<Vec<f64>>,
    pub grad_residual: f64,
    pub d0_residual: f64,
    pub grad_zero: bool,
    pub d0_zero: bool,
    pub affine_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ClusterOut {
    pub value: f64,
    pub multiplicity: usize,
    pub indices: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct SplitOut {
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<ClusterOut>,
    pub flat_block: Vec<usize>,
    pub curved_blocks: Vec<Vec<usize>>,
    pub ambiguous: bool,
    pub atil_off_flat: f64,
    pub blockwise_residual: f64,
    pub eigenvalue_spread: f64,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub dimension: usize,
    pub verdict: &'static str,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
    pub samples: Vec<Vec<f64>>,
    pub residuals: Vec<ResidualOut>,
    pub first_blocks: Vec<ResidualOut>,
    pub second_blocks: Vec<ResidualOut>,
    pub nonzero_second_blocks: Vec<String>,
    pub engine_oracle_max_dev: f64,
    pub theorem: TheoremOut,
    pub a_tilde: Option<AtilOut>,
    pub eisenhart: Option<SplitOut>,
}

/// Exit code of a classification: 0 determinate, 2 undetermined.
pub fn verdict_exit(v: Verdict) -> i32 {
    if v == Verdict::Undetermined {
        2
    } else {
        0
    }
}

pub fn check(spec: &MetricSpec, opts: &SampleOptions) -> Result<(CheckReport, Verdict), CliError> {
    let pts = opts.points(spec);
    classify::check_samples(spec, &pts)?;
    let set = classify::evaluate(spec, &pts, 2)?;
    let rep = report_from(&set, opts.tol, opts.depth.clamp(1, 2));
    let sc = structural_from(&set, opts.tol);
    let atil = extract_a_tilde(spec, &pts, opts.tol).ok().map(|a| AtilOut {
        eigenvalues: a.eigenvalues,
        grad_residual: a.grad_residual,
        d0_residual: a.d0_residual,
        grad_zero: a.grad_zero,
        d0_zero: a.d0_zero,
        affine_residual: a.affine_residual,
    });
    let splits: Result<Vec<_>, _> = pts.iter().map(|p| eisenhart_split(spec, p, DEFAULT_CLUSTER_TOL)).collect();
    let eisenhart = splits.ok().filter(|s| !s.is_empty()).map(|s| {
        let spread = eigenvalue_spread(&s);
        let c = &s[0];
        SplitOut {
            eigenvalues: c.eigenvalues.clone(),
            clusters: c
                .clusters
                .iter()
                .map(|k| ClusterOut { value: k.value, multiplicity: k.multiplicity, indices: k.indices.clone() })
                .collect(),
            flat_block: c.flat_block.clone(),
            curved_blocks: c.curved_blocks.clone(),
            ambiguous: c.ambiguous,
            atil_off_flat: c.atil_off_flat,
            blockwise_residual: c.blockwise_residual,
            eigenvalue_spread: spread,
        }
    });
    let out = CheckReport {
        schema_version: SCHEMA_VERSION,
        command: "check",
        dimension: spec.n(),
        verdict: rep.verdict.as_str(),
        depth: rep.depth,
        tol: rep.tol,
        seed: opts.seed,
        samples: pts.iter().map(|p| p.values()).collect(),
        residuals: rep.residuals.iter().map(ResidualOut::from).collect(),
        first_blocks: rep.first_blocks.iter().map(ResidualOut::from).collect(),
        second_blocks: rep.second_blocks.iter().map(ResidualOut::from).collect(),
        nonzero_second_blocks: rep.nonzero_second_blocks().iter().map(|s| s.to_string()).collect(),
        engine_oracle_max_dev: rep.engine_oracle_max_dev,
        theorem: TheoremOut {
            within_hypothesis: sc.within_hypothesis,
            checks: sc.checks.iter().map(|c| CheckOut { name: c.name, pass: c.pass, residual: c.residual }).collect(),
            s_values: sc.s_values.clone(),
        },
        a_tilde: atil,
        eisenhart,
    };
    Ok((out, rep.verdict))
}

#[derive(Debug, Serialize)]
pub struct BlockOut {
    pub name: &'static str,
    pub max_abs: f64,
    pub max_rel: f64,
}

#[derive(Debug, Serialize)]
pub struct DiffReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub tol: f64,
    pub samples: usize,
    pub blocks: Vec<BlockOut>,
    pub max_rel: f64,
    pub pass: bool,
}

impl DiffReport {
    pub fn to_table(&self) -> String {
        let mut out = String::from("block,max_abs,max_rel\n");
        for b in &self.blocks {
            out.push_str(&format!(
                "{},{},{}\n",
                b.name,
                crate::output::fmt_f64(b.max_abs),
                crate::output::fmt_f64(b.max_rel)
            ));
        }
        out
    }
}

/// Engine against oracle on every block; `mutate` corrupts the engine side
/// (negative controls).
pub fn oracle_diff(
    spec: &MetricSpec,
    opts: &SampleOptions,
    mutate: Option<&dyn Fn(&mut EngineOutput)>,
) -> Result<DiffReport, CliError> {
    let pts = opts.points(spec);
    let mut blocks: Vec<BlockOut> = Vec::new();
    for p in &pts {
        let mut e = analyze(spec, p, 2).map_err(|e| CliError::Classify(e.into()))?;
        if let Some(f) = mutate {
            f(&mut e);
        }
        let o = oracle_packs(spec, p, 2).map_err(|e| CliError::Classify(e.into()))?;
        let devs = compare(&e, &o);
        if blocks.is_empty() {
            blocks = devs.iter().map(|d| BlockOut { name: d.name, max_abs: 0.0, max_rel: 0.0 }).collect();
        }
        for (b, d) in blocks.iter_mut().zip(&devs) {
            b.max_abs = b.max_abs.max(d.abs);
            // NaN must not pass
            b.max_rel = if d.rel.is_nan() { f64::NAN } else { b.max_rel.max(d.rel) };
        }
    }
    let max_rel = blocks.iter().map(|b| b.max_rel).fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    Ok(DiffReport {
        schema_version: SCHEMA_VERSION,
        command: "oracle-diff",
        tol: ORACLE_DIFF_TOL,
        samples: pts.len(),
        blocks,
        max_rel,
        pass: max_rel < ORACLE_DIFF_TOL,
    })
}

#[derive(Debug, Clone)]
pub struct CanonicalizeOptions {
    pub sample: SampleOptions,
    pub interval: Option<(f64, f64)>,
    pub block: Option<Vec<usize>>,
    pub steps_per_unit: usize,
    pub output_samples: usize,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Serialize)]
pub struct CanonSample {
    pub u: f64,
    pub a: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct NormalFormOut {
    pub rotation: Vec<Vec<f64>>,
    pub a1_diagonal: Vec<f64>,
    pub a0: Vec<Vec<f64>>,
    pub u_shift: f64,
}

#[derive(Debug, Serialize)]
pub struct CanonicalReportOut {
    pub schema_version: u32,
    pub command: &'static str,
    pub verdict: &'static str,
    pub flat_block: Vec<usize>,
    pub interval: (f64, f64),
    pub steps_per_unit: usize,
    pub a0: Option<Vec<Vec<f64>>>,
    pub a1: Option<Vec<Vec<f64>>>,
    pub normal_form: Option<NormalFormOut>,
    pub affine_residual: Option<f64>,
    pub proper: Option<bool>,
    pub orthogonality_error: Option<f64>,
    pub max_drift: Option<f64>,
    pub translation_residual: Option<f64>,
    pub samples: Vec<CanonSample>,
}

/// Reconstruction report and exit code (2 if the spec is not proper
/// 2nd-symmetric; the verdict is attached).
pub fn canonicalize(spec: &MetricSpec, opts: &CanonicalizeOptions) -> Result<(CanonicalReportOut, i32), CliError> {
    let pts = opts.sample.points(spec);
    let rep = classify::symmetry_order(spec, &pts, opts.sample.tol, 2)?;
    let interval = opts.interval.unwrap_or(spec.domain()[0]);
    let mut out = CanonicalReportOut {
        schema_version: SCHEMA_VERSION,
        command: "canonicalize",
        verdict: rep.verdict.as_str(),
        flat_block: Vec::new(),
        interval,
        steps_per_unit: opts.steps_per_unit,
        a0: None,
        a1: None,
        normal_form: None,
        affine_residual: None,
        proper: None,
        orthogonality_error: None,
        max_drift: None,
        translation_residual: None,
        samples: Vec::new(),
    };
    if rep.verdict != Verdict::ProperSecondSymmetric {
        return Ok((out, 2));
    }
    let block = match &opts.block {
        Some(b) => b.clone(),
        None => eisenhart_split(spec, &spec.center(), DEFAULT_CLUSTER_TOL)?.flat_block,
    };
    if block.is_empty() {
        return Err(CliError::Usage("no flat block found; pass --block".into()));
    }
    out.flat_block = block.clone();
    let data = FlatBlockData::new(spec, &block)?;
    data.validate(interval, 9, 1e-8)?;
    let mut copts = CanonicalOptions::new(interval);
    copts.steps_per_unit = opts.steps_per_unit;
    copts.samples = opts.output_samples;
    let cf = canonical::reconstruct(&data, &copts)?;
    let vr = canonical::verify_canonical(&cf, 1e-8);
    out.a0 = Some(matrix_rows(&cf.a0));
    out.a1 = Some(matrix_rows(&cf.a1));
    out.normal_form = Some(NormalFormOut {
        rotation: matrix_rows(&vr.normal_form.rotation),
        a1_diagonal: vr.normal_form.a1_diag.clone(),
        a0: matrix_rows(&vr.normal_form.a0),
        u_shift: vr.normal_form.u_shift,
    });
    out.affine_residual = Some(vr.affine_residual);
    out.proper = Some(vr.proper);
    out.orthogonality_error = Some(cf.orthogonality_error);
    out.max_drift = Some(cf.max_drift);
    out.translation_residual = Some(cf.translation_residual);
    out.samples = (0..cf.us.len())
        .map(|k| CanonSample {
            u: cf.us[k],
            a: matrix_rows(&cf.a_of_u[k]),
            r: matrix_rows(&cf.r_of_u[k]),
            d: vector(&cf.d_of_u[k]),
        })
        .collect();
    Ok((out, if vr.proper { 0 } else { 2 }))
}

#[derive(Debug, Clone)]
pub enum Experiment {
    /// Geodesic from `q0` with velocity `v0`.
    Geodesic { q0: Vec<f64>, v0: Vec<f64> },
    /// Null sectional curvature along `u ↦ (u, 0, 0)` with partner `∂_{partner}`.
    NullSec { u0: f64, partner: usize },
    /// `D₀`-transport of `vector` through `(u0, x)`.
    D0 { u0: f64, x: Vec<f64>, vector: Vec<f64> },
}

fn coord_names(spec: &MetricSpec, prefix: &str) -> Vec<String> {
    let mut v = vec![format!("{prefix}u"), format!("{prefix}v")];
    v.extend((2..spec.n()).map(|i| format!("{prefix}x{i}")));
    v
}

pub fn transport(spec: &MetricSpec, exp: &Experiment, span: f64, steps: usize) -> Result<Table, CliError> {
    match exp {
        Experiment::Geodesic { q0, v0 } => {
            let traj = transport::geodesic_integrate(spec, q0, v0, span, steps)?;
            let mut cols = vec!["tau".to_string()];
            cols.extend(coord_names(spec, ""));
            cols.extend(coord_names(spec, "d"));
            cols.push("energy".into());
            cols.push("killing".into());
            let mut t = Table::new(cols);
            let mut k = vec![0.0; spec.n()];
            k[1] = -1.0;
            for j in 0..traj.taus.len() {
                let q = &traj.points[j];
                let v = &traj.velocities[j];
                let g = brinkmann::chart::coordinate_metric_at(spec, &ChartPoint::new(q[0], q[2..].to_vec()))
                    .map_err(TransportError::from)?;
                let mut row = vec![traj.taus[j]];
                row.extend(q);
                row.extend(v);
                row.push(transport::inner(&g, v, v));
                row.push(transport::inner(&g, &k, v));
                t.rows.push(row);
            }
            Ok(t)
        }
        Experiment::NullSec { u0, partner } => {
            if !(2..spec.n()).contains(partner) {
                return Err(CliError::Usage(format!("partner must be a leaf index in 2..{}", spec.n())));
            }
            let (q, v) = transport::central_null_start(spec, *u0)?;
            let traj = transport::geodesic_integrate(spec, &q, &v, span, steps)?;
            let mut x = vec![0.0; spec.n()];
            x[*partner] = 1.0;
            let ns = transport::null_sectional_growth(spec, &traj, &x, 1e-12)?;
            let mut t = Table::new(vec!["tau".into(), "u".into(), "K".into(), "dK".into()]);
            for j in 0..ns.taus.len() {
                let dk = if j < ns.dk.len() { ns.dk[j] } else { ns.dk[j - 1] };
                t.rows.push(vec![ns.taus[j], traj.points[j][0], ns.k[j], dk]);
            }
            Ok(t)
        }
        Experiment::D0 { u0, x, vector } => {
            let p = ChartPoint::new(*u0, x.clone());
            let out = transport::d0_transport(spec, &p, std::slice::from_ref(vector), span, steps)?;
            let mut cols = vec!["u".to_string()];
            cols.extend((2..spec.n()).map(|i| format!("X{i}")));
            cols.push("norm".into());
            let mut t = Table::new(cols);
            for (u, vs) in out.us.iter().zip(&out.vectors) {
                let g = spec.leaf_metric_at(&ChartPoint::new(*u, x.clone())).map_err(TransportError::from)?;
                let mut row = vec![*u];
                row.extend(&vs[0]);
                row.push(transport::inner(&g, &vs[0], &vs[0]).sqrt());
                t.rows.push(row);
            }
            Ok(t)
        }
    }
}

/// Adds `delta` to every component of the engine block `name`. Returns
/// false for unknown names.
pub fn perturb_block(e: &mut EngineOutput, name: &str, delta: f64) -> bool {
    fn bump(t: &mut brinkmann::field::FrameTensor, delta: f64) {
        t.data_mut().iter_mut().for_each(|v| *v += delta);
    }
    let c = &mut e.curvature;
    match name {
        "Rbar^i_jkl" => bump(&mut c.rbar, delta),
        "R^i_j0k" => bump(&mut c.r_i0k, delta),
        "A" => bump(&mut c.a, delta),
        "B" => bump(&mut c.b, delta),
        "Ric_00" => c.ric00 += delta,
        "Ric_0i" => bump(&mut c.ric0i, delta),
        "Ric_ij" => bump(&mut c.ricij, delta),
        "S" => c.s += delta,
        _ => {
            if let Some(f) = e.first.as_mut() {
                let t = match name {
                    "Atil" => Some(&mut f.atil),
                    "Ahat" => Some(&mut f.ahat),
                    "Btil" => Some(&mut f.btil),
                    "Bhat" => Some(&mut f.bhat),
                    "Rtil" => Some(&mut f.rtil),
                    "grad Rbar" => Some(&mut f.grad_rbar),
                    _ => None,
                };
                if let Some(t) = t {
                    bump(t, delta);
                    return true;
                }
            }
            let k = brinkmann::curvature::SECOND_BLOCK_NAMES.iter().position(|n| *n == name);
            match (k, e.second.as_mut()) {
                (Some(k), Some(s)) => bump(&mut s.blocks[k], delta),
                _ => return false,
            }
        }
    }
    true
}
