use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brinkmann::spaces::{Block, CwParams};
use brinkmann_cli::commands::{self, CanonicalizeOptions, CliError, Experiment, SampleOptions};
use brinkmann_cli::metric_file::{self, parse_block, Generator};
use brinkmann_cli::output::to_json;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

/// Curvature-symmetry analysis of Brinkmann-chart metrics.
///
/// Exit codes: 0 determinate result, 2 undetermined or precondition not
/// met, 1 error.
#[derive(Parser)]
#[command(name = "brinkmann", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schema {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct Common {
    /// Residual threshold for "vanishes".
    #[arg(long, default_value_t = brinkmann::classify::DEFAULT_TOL)]
    tol: f64,
    /// Number of sample points (box center plus Halton points).
    #[arg(long, default_value_t = 9)]
    samples: usize,
    /// Offset into the Halton sequence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn sample(&self, depth: usize) -> SampleOptions {
        SampleOptions { tol: self.tol, samples: self.samples, depth, seed: self.seed }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify a metric: symmetry verdict, structural checks, Ã and the
    /// Eisenhart split.
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Highest covariant derivative of R examined.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        depth: u8,
        #[arg(long, value_enum, default_value = "json")]
        schema: Schema,
    },
    /// Emit a metric file.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Maximum engine-vs-oracle deviation per tensor block; exit 0 iff all
    /// are below 1e-8.
    OracleDiff {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "json")]
        schema: Schema,
        /// Test hook: add DELTA to every component of an engine block.
        #[arg(long, hide = true, value_name = "BLOCK=DELTA")]
        perturb: Option<String>,
    },
    /// Rebuild the plane-wave normal form on the flat block of a proper
    /// 2nd-symmetric metric.
    Canonicalize {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// u-interval, "lo,hi" (default: the box).
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        /// Flat-block leaf indices, e.g. "2,3" (default: from the Eisenhart split).
        #[arg(long)]
        block: Option<String>,
        #[arg(long, default_value_t = brinkmann::canonical::DEFAULT_STEPS_PER_UNIT)]
        steps_per_unit: usize,
        /// Rows of the A/R/D sample table.
        #[arg(long, default_value_t = 21)]
        table: usize,
    },
    /// Transport experiments, as CSV.
    ///
    /// geodesic: tau, u, v, x2.., du, dv, dx2.., energy = g(γ',γ'), killing = g(K,γ').
    /// nullsec: tau, u, K = R(V,X,V,X)/g(X,X), dK (forward difference) along u ↦ (u,0,0).
    /// d0: u, X2.., norm.
    Transport {
        file: PathBuf,
        #[arg(long, value_enum)]
        experiment: ExperimentKind,
        /// Parameter span.
        #[arg(long)]
        span: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Start value of u (nullsec, d0); default: lower end of the box.
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<f64>,
        /// Initial point "u,v,x2,..." (geodesic; default: box center, v = 0).
        #[arg(long, allow_hyphen_values = true)]
        q0: Option<String>,
        /// Initial velocity (geodesic; default: lightlike E0).
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<String>,
        /// Leaf index of the spacelike partner ∂_i (nullsec).
        #[arg(long, default_value_t = 2)]
        partner: usize,
        /// Leaf coordinates of the E0 curve (d0; default: box center).
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Leaf vector to transport (d0; default: first basis vector).
        #[arg(long, allow_hyphen_values = true)]
        vector: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        schema: Schema,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Geodesic,
    Nullsec,
    D0,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// CW metric H = Σ_k u^k (P_k)_ij x^i x^j.
    Cw {
        #[arg(long)]
        d: usize,
        /// Coefficient P_k, in order k = 0, 1, ...: "0", "diag(a,b)" or rows "a,b;c,d".
        #[arg(long = "p", allow_hyphen_values = true)]
        p: Vec<String>,
        /// Product factor, "sphere:r", "hyperbolic:r" or "euclidean:k".
        #[arg(long)]
        block: Vec<String>,
    },
    /// Product of a metric file with extra blocks.
    Product {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, required = true)]
        block: Vec<String>,
    },
    /// A bundled library metric.
    Fixture {
        name: String,
        #[arg(long)]
        block: Vec<String>,
    },
    /// Random polynomial metric.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number list: {text:?}"))))
        .collect()
}

fn matrix(text: &str, m: usize) -> Result<DMatrix<f64>, CliError> {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix("diag(").and_then(|s| s.strip_suffix(')')) {
        let d = list(inner)?;
        if d.len() != m {
            return Err(CliError::Usage(format!("{text:?}: expected {m} diagonal entries")));
        }
        return Ok(DMatrix::from_fn(m, m, |i, j| if i == j { d[i] } else { 0.0 }));
    }
    if !t.contains(',') && !t.contains(';') {
        let c: f64 = t.parse().map_err(|_| CliError::Usage(format!("bad matrix {text:?}")))?;
        return Ok(DMatrix::from_diagonal_element(m, m, c));
    }
    let rows: Vec<Vec<f64>> = t.split(';').map(list).collect::<Result<_, _>>()?;
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Usage(format!("{text:?}: expected a {m}x{m} matrix")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn blocks(specs: &[String]) -> Result<Vec<Block>, CliError> {
    specs
        .iter()
        .map(|s| {
            let (kind, arg) = s.split_once(':').unwrap_or((s.as_str(), ""));
            let radius = arg.parse::<f64>().ok();
            let k = arg.parse::<usize>().ok();
            parse_block(kind, radius, k).map_err(CliError::Usage)
        })
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(kind: &GenerateKind) -> Result<String, CliError> {
    let (spec, header) = match kind {
        GenerateKind::Cw { d, p, block } => {
            let m = d.saturating_sub(2);
            let coeffs = if p.is_empty() {
                vec![DMatrix::zeros(m, m)]
            } else {
                p.iter().map(|t| matrix(t, m)).collect::<Result<Vec<_>, _>>()?
            };
            let params = CwParams::new(*d, coeffs)?;
            let spec = Generator::Cw(params).build(&blocks(block)?)?;
            (spec, vec![
                format!("CW metric d = {d}, H = sum_k u^k (P_k)_ij x^i x^j with P_k = {p:?}"),
                "curvature slice: R^1_{i0j} = -2 P_ij(u)".to_string(),
            ])
        }
        GenerateKind::Product { base, block } => {
            let mut spec = metric_file::load(base)?;
            for b in blocks(block)? {
                spec = brinkmann::spaces::make_product(&spec, b)?;
            }
            (spec, vec![format!("product of {} with {block:?}", base.display())])
        }
        GenerateKind::Fixture { name, block } => {
            let spec = Generator::Fixture(name.clone()).build(&blocks(block)?)?;
            (spec, vec![format!("library metric {name}")])
        }
        GenerateKind::Random { n, seed } => {
            let spec = Generator::Random { n: *n, seed: *seed }.build(&[])?;
            (spec, vec![format!("random polynomial metric n = {n}, seed = {seed}")])
        }
    };
    Ok(metric_file::write_metric(&spec, &header))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Check { file, common, depth, schema } => {
            let spec = metric_file::load(&file)?;
            let (rep, verdict) = commands::check(&spec, &common.sample(depth as usize))?;
            let text = match schema {
                Schema::Json => to_json(&rep),
                Schema::Csv => {
                    let mut s = String::from("name,raw,scaled,level\n");
                    for r in rep.residuals.iter().chain(&rep.first_blocks).chain(&rep.second_blocks) {
                        s.push_str(&format!(
                            "{},{},{},{}\n",
                            r.name,
                            brinkmann_cli::output::fmt_f64(r.raw),
                            brinkmann_cli::output::fmt_f64(r.scaled),
                            r.level
                        ));
                    }
                    s
                }
            };
            emit(&text, common.out.as_deref())?;
            Ok(commands::verdict_exit(verdict))
        }
        Command::Generate { kind, out } => {
            emit(&generate(&kind)?, out.as_deref())?;
            Ok(0)
        }
        Command::OracleDiff { file, common, schema, perturb } => {
            let spec = metric_file::load(&file)?;
            let hook = match &perturb {
                Some(p) => {
                    let (name, delta) = p
                        .rsplit_once('=')
                        .and_then(|(n, d)| d.parse::<f64>().ok().map(|d| (n.to_string(), d)))
                        .ok_or_else(|| CliError::Usage(format!("--perturb expects BLOCK=DELTA, got {p:?}")))?;
                    Some(move |e: &mut brinkmann::curvature::EngineOutput| {
                        commands::perturb_block(e, &name, delta);
                    })
                }
                None => None,
            };
            let rep = commands::oracle_diff(
                &spec,
                &common.sample(2),
                hook.as_ref().map(|h| h as &dyn Fn(&mut brinkmann::curvature::EngineOutput)),
            )?;
            let text = match schema {
                Schema::Json => to_json(&rep),
                Schema::Csv => rep.to_table(),
            };
            emit(&text, common.out.as_deref())?;
            Ok(if rep.pass { 0 } else { 1 })
        }
        Command::Canonicalize { file, common, interval, block, steps_per_unit, table } => {
            let spec = metric_file::load(&file)?;
            let interval = match interval {
                Some(s) => match list(&s)?.as_slice() {
                    [a, b] => Some((*a, *b)),
                    _ => return Err(CliError::Usage("--interval expects lo,hi".into())),
                },
                None => None,
            };
            let block = match block {
                Some(s) => Some(
                    s.split(',')
                        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad --block {s:?}"))))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                None => None,
            };
            let opts = CanonicalizeOptions {
                sample: common.sample(2),
                interval,
                block,
                steps_per_unit,
                output_samples: table,
            };
            let (rep, code) = commands::canonicalize(&spec, &opts)?;
            if code != 0 {
                eprintln!("canonicalize: verdict is {}, not proper_second_symmetric", rep.verdict);
            }
            emit(&to_json(&rep), common.out.as_deref())?;
            Ok(code)
        }
        Command::Transport { file, experiment, span, steps, u0, q0, v0, partner, x, vector, schema, out } => {
            let spec = metric_file::load(&file)?;
            let (ulo, uhi) = spec.domain()[0];
            let center = spec.center();
            let exp = match experiment {
                ExperimentKind::Geodesic => {
                    let q0 = match q0 {
                        Some(s) => list(&s)?,
                        None => {
                            let mut q = vec![center.u, 0.0];
                            q.extend(center.x.clone());
                            q
                        }
                    };
                    let v0 = match v0 {
                        Some(s) => list(&s)?,
                        None => brinkmann::transport::lightlike_velocity(&spec, &q0, &vec![0.0; spec.m()])?,
                    };
                    Experiment::Geodesic { q0, v0 }
                }
                ExperimentKind::Nullsec => Experiment::NullSec { u0: u0.unwrap_or(ulo), partner },
                ExperimentKind::D0 => {
                    let x = match x {
                        Some(s) => list(&s)?,
                        None => center.x.clone(),
                    };
                    let vector = match vector {
                        Some(s) => list(&s)?,
                        None => (0..spec.m()).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
                    };
                    Experiment::D0 { u0: u0.unwrap_or(ulo), x, vector }
                }
            };
            let start = match &exp {
                Experiment::Geodesic { q0, .. } => q0[0],
                Experiment::NullSec { u0, .. } | Experiment::D0 { u0, .. } => *u0,
            };
            // stay strictly inside the box by default
            let span = span.unwrap_or(0.999 * (uhi - start));
            let table = commands::transport(&spec, &exp, span, steps)?;
            let text = match schema {
                Schema::Json => to_json(&table),
                Schema::Csv => table.to_csv(),
            };
            emit(&text, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
