//! `.metric` files: TOML with a `[domain]` table and either a `[metric]`
//! table of DSL strings or a `[generator]` table.
//!
//! ```toml
//! dimension = 4
//!
//! [domain]
//! u = [-1.0, 1.0]
//! x2 = [-1.0, 1.0]
//!
//! [metric]
//! H = "u*x2^2 + x3^2"
//! W2 = "0"
//! g23 = "0"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use brinkmann::expr::{parse_any, ParseError};
use brinkmann::spaces::{self, Block, CwParams, SpaceError};
use brinkmann::{Expr, MetricSpec};
use nalgebra::DMatrix;
use serde::Deserialize;
use toml::Spanned;

/// Error with a `file:line:col` position.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFileError {
    pub file: String,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for MetricFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file, self.line, self.col, self.message)
    }
}

impl std::error::Error for MetricFileError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dimension: Option<Spanned<usize>>,
    domain: Option<BTreeMap<String, Spanned<Vec<f64>>>>,
    metric: Option<Spanned<BTreeMap<String, Spanned<String>>>>,
    generator: Option<Spanned<RawGenerator>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    kind: Spanned<String>,
    /// CW: dimension `d` and coefficient matrices `P_0, P_1, ...`.
    d: Option<usize>,
    p: Option<Vec<Vec<Vec<f64>>>>,
    /// `fixture`: bundled library name.
    name: Option<String>,
    /// `random`: polynomial spec seed (uses `dimension`).
    seed: Option<u64>,
    /// `rotation_w`: angular velocity.
    omega: Option<f64>,
    #[serde(default)]
    blocks: Vec<RawBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    kind: String,
    radius: Option<f64>,
    k: Option<usize>,
}

/// Expanded form of a `[generator]` table.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Cw(CwParams),
    Fixture(String),
    Random { n: usize, seed: u64 },
    RotationW { omega: f64 },
}

impl Generator {
    pub fn build(&self, blocks: &[Block]) -> Result<MetricSpec, SpaceError> {
        let mut spec = match self {
            Generator::Cw(p) => spaces::make_cw(p)?,
            Generator::Fixture(name) => spaces::fixture(name)?,
            Generator::Random { n, seed } => spaces::random_polynomial_spec(*n, *seed)?,
            Generator::RotationW { omega } => spaces::rotation_w_spec(*omega),
        };
        for b in blocks {
            spec = spaces::make_product(&spec, *b)?;
        }
        Ok(spec)
    }
}

pub fn parse_block(kind: &str, radius: Option<f64>, k: Option<usize>) -> Result<Block, String> {
    match kind {
        "sphere" => Ok(Block::Sphere { radius: radius.unwrap_or(1.0) }),
        "hyperbolic" => Ok(Block::Hyperbolic { radius: radius.unwrap_or(1.0) }),
        "euclidean" => Ok(Block::Euclidean { k: k.unwrap_or(1) }),
        other => Err(format!("unknown block kind `{other}` (sphere, hyperbolic, euclidean)")),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Ctx<'a> {
    file: &'a str,
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> MetricFileError {
        let (line, col) = span.map_or((1, 1), |s| line_col(self.text, s.start));
        MetricFileError { file: self.file.to_string(), line, col, message: message.into() }
    }

    fn expr(&self, key: &str, value: &Spanned<String>, n: usize) -> Result<Expr, MetricFileError> {
        parse_any(value.get_ref(), n).map_err(|e: ParseError| {
            // +1 skips the opening quote
            let start = value.span().start + 1 + e.offset().unwrap_or(0);
            self.err(Some(start..start), format!("{key}: {e}"))
        })
    }
}

/// Parses metric file text; `file` labels diagnostics.
pub fn parse_metric(text: &str, file: &str) -> Result<MetricSpec, MetricFileError> {
    let ctx = Ctx { file, text };
    let raw: RawFile = toml::from_str(text).map_err(|e| ctx.err(e.span(), e.message().to_string()))?;

    let mut spec = match (&raw.metric, &raw.generator) {
        (Some(_), Some(g)) => {
            return Err(ctx.err(Some(g.span()), "give either [metric] or [generator], not both"));
        }
        (None, None) => return Err(ctx.err(None, "missing [metric] or [generator] table")),
        (Some(m), None) => {
            let n = raw
                .dimension
                .as_ref()
                .ok_or_else(|| ctx.err(Some(m.span()), "`dimension` is required with [metric]"))?;
            explicit_metric(&ctx, *n.get_ref(), n.span(), m.get_ref())?
        }
        (None, Some(g)) => {
            let spec = generated_metric(&ctx, raw.dimension.as_ref().map(|d| *d.get_ref()), g)?;
            if let Some(d) = &raw.dimension {
                if *d.get_ref() != spec.n() {
                    return Err(ctx.err(
                        Some(d.span()),
                        format!("dimension {} does not match the generated dimension {}", d.get_ref(), spec.n()),
                    ));
                }
            }
            spec
        }
    };

    if let Some(dom) = &raw.domain {
        let n = spec.n();
        let mut domain = spec.domain().to_vec();
        for (key, val) in dom {
            let slot = match key.as_str() {
                "u" => 0,
                k => match k.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    Some(i) if (2..n).contains(&i) && k == format!("x{i}") => i - 1,
                    _ => return Err(ctx.err(Some(val.span()), format!("unknown domain coordinate `{key}`"))),
                },
            };
            match val.get_ref().as_slice() {
                [lo, hi] if lo.is_finite() && hi.is_finite() && lo < hi => domain[slot] = (*lo, *hi),
                _ => return Err(ctx.err(Some(val.span()), format!("domain `{key}` must be [lo, hi] with lo < hi"))),
            }
        }
        spec = spec.with_domain(domain).map_err(|e| ctx.err(None, e.to_string()))?;
    }
    Ok(spec)
}

fn explicit_metric(
    ctx: &Ctx,
    n: usize,
    n_span: Range<usize>,
    table: &BTreeMap<String, Spanned<String>>,
) -> Result<MetricSpec, MetricFileError> {
    if n < 2 {
        return Err(ctx.err(Some(n_span), format!("dimension must be at least 2, got {n}")));
    }
    let m = n - 2;
    let mut h = Expr::Num(0.0);
    let mut w = vec![Expr::Num(0.0); m];
    let mut g: Vec<Vec<Option<(Expr, &Spanned<String>)>>> = vec![vec![None; m]; m];
    for (key, val) in table {
        if key == "H" {
            h = ctx.expr(key, val, n)?;
            continue;
        }
        let index = |s: &str| s.parse::<usize>().ok().filter(|i| (2..n).contains(i) && s == i.to_string());
        if let Some(i) = key.strip_prefix('W').and_then(index) {
            w[i - 2] = ctx.expr(key, val, n)?;
            continue;
        }
        if let Some(rest) = key.strip_prefix('g') {
            // g23 or g2_3 for indices ≥ 10
            let pair = match rest.split_once('_') {
                Some((a, b)) => index(a).zip(index(b)),
                None if rest.len() == 2 => index(&rest[..1]).zip(index(&rest[1..])),
                None => None,
            };
            if let Some((i, j)) = pair {
                let e = ctx.expr(key, val, n)?;
                for (a, b) in [(i, j), (j, i)] {
                    if let Some((prev, pspan)) = &g[a - 2][b - 2] {
                        if *prev != e {
                            return Err(ctx.err(
                                Some(val.span()),
                                format!("{key} conflicts with the entry at offset {}", pspan.span().start),
                            ));
                        }
                    }
                }
                g[i - 2][j - 2] = Some((e.clone(), val));
                g[j - 2][i - 2] = Some((e, val));
                continue;
            }
        }
        // point at the key, which sits before the value on its line
        let start = val.span().start;
        let line_start = ctx.text[..start].rfind('\n').map_or(0, |k| k + 1);
        let at = ctx.text[line_start..start].find(key.as_str()).map_or(start, |k| line_start + k);
        return Err(ctx.err(Some(at..at + key.len()), format!("unknown metric key `{key}`")));
    }
    let g: Vec<Vec<Expr>> = g
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, e)| e.map_or(Expr::Num(if i == j { 1.0 } else { 0.0 }), |(e, _)| e))
                .collect()
        })
        .collect();
    MetricSpec::new(n, h, w, g, None).map_err(|e| ctx.err(None, e.to_string()))
}

fn generated_metric(
    ctx: &Ctx,
    dimension: Option<usize>,
    g: &Spanned<RawGenerator>,
) -> Result<MetricSpec, MetricFileError> {
    let span = Some(g.span());
    let raw = g.get_ref();
    let gen = match raw.kind.get_ref().as_str() {
        "cw" => {
            let d = raw.d.or(dimension).ok_or_else(|| ctx.err(span.clone(), "cw generator needs `d`"))?;
            let m = d.saturating_sub(2);
            let ps = raw.p.clone().unwrap_or_else(|| vec![vec![vec![0.0; m]; m]]);
            let mut coeffs = Vec::new();
            for (k, rows) in ps.iter().enumerate() {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(ctx.err(span.clone(), format!("p[{k}] must be {m}x{m}")));
                }
                coeffs.push(DMatrix::from_fn(m, m, |i, j| rows[i][j]));
            }
            Generator::Cw(CwParams::new(d, coeffs).map_err(|e| ctx.err(span.clone(), e.to_string()))?)
        }
        "fixture" => Generator::Fixture(raw.name.clone().ok_or_else(|| ctx.err(span.clone(), "fixture generator needs `name`"))?),
        "random" => Generator::Random {
            n: dimension.ok_or_else(|| ctx.err(span.clone(), "random generator needs `dimension`"))?,
            seed: raw.seed.unwrap_or(0),
        },
        "rotation_w" => Generator::RotationW { omega: raw.omega.unwrap_or(0.7) },
        other => {
            return Err(ctx.err(
                Some(raw.kind.span()),
                format!("unknown generator kind `{other}` (cw, fixture, random, rotation_w)"),
            ))
        }
    };
    let blocks = raw
        .blocks
        .iter()
        .map(|b| parse_block(&b.kind, b.radius, b.k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ctx.err(span.clone(), e))?;
    gen.build(&blocks).map_err(|e| ctx.err(span, e.to_string()))
}

pub fn load(path: &std::path::Path) -> Result<MetricSpec, MetricFileError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| MetricFileError { file: label.clone(), line: 1, col: 1, message: e.to_string() })?;
    parse_metric(&text, &label)
}

/// Explicit-expression file text for `spec`. `header` lines are emitted as
/// comments.
pub fn write_metric(spec: &MetricSpec, header: &[String]) -> String {
    let n = spec.n();
    let mut out = String::new();
    out.push_str("# Brinkmann chart: g = -2 du (dv + H du + W_i dx^i) + g_ij dx^i dx^j\n");
    for line in header {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!("dimension = {n}\n\n[domain]\n"));
    for (k, (lo, hi)) in spec.domain().iter().enumerate() {
        let name = if k == 0 { "u".to_string() } else { format!("x{}", k + 1) };
        out.push_str(&format!("{name} = [{lo:?}, {hi:?}]\n"));
    }
    out.push_str("\n[metric]\n");
    out.push_str(&format!("H = \"{}\"\n", spec.h()));
    for (i, w) in spec.w().iter().enumerate() {
        out.push_str(&format!("W{} = \"{}\"\n", i + 2, w));
    }
    let g = spec.g();
    for i in 0..g.len() {
        for j in i..g.len() {
            let key = if i + 2 < 10 && j + 2 < 10 { format!("g{}{}", i + 2, j + 2) } else { format!("g{}_{}", i + 2, j + 2) };
            out.push_str(&format!("{key} = \"{}\"\n", g[i][j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn expression_error_points_into_the_string() {
        let text = "dimension = 4\n[metric]\nH = \"u + v\"\n";
        let e = parse_metric(text, "m.metric").unwrap_err();
        assert_eq!((e.line, e.col), (3, 10));
        assert!(e.to_string().starts_with("m.metric:3:10: H:"));
    }

    #[test]
    fn defaults_fill_w_and_g() {
        let spec = parse_metric("dimension = 4\n[metric]\nH = \"x2^2\"\ng33 = \"2\"\n", "-").unwrap();
        assert!(spec.w().iter().all(|w| w.is_zero()));
        assert_eq!(spec.g()[0][0], Expr::Num(1.0));
        assert_eq!(spec.g()[1][1], Expr::Num(2.0));
        assert_eq!(spec.domain(), &[(-1.0, 1.0); 3]);
    }

    #[test]
    fn conflicting_symmetric_entries() {
        let e = parse_metric("dimension = 4\n[metric]\ng23 = \"1\"\ng32 = \"2\"\n", "f").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn unknown_keys_and_tables() {
        assert!(parse_metric("dimension = 4\n[metric]\nW7 = \"0\"\n", "f").is_err());
        assert!(parse_metric("dimension = 4\n[metric]\n[extra]\n", "f").is_err());
        assert!(parse_metric("dimension = 4\n[metric]\n[generator]\nkind = \"cw\"\n", "f").is_err());
        let e = parse_metric("dimension = 4\n[domain]\nu = [1.0, -1.0]\n[metric]\n", "f").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn generator_expands() {
        let text = "[generator]\nkind = \"cw\"\nd = 4\np = [[[0,0],[0,1]], [[1,0],[0,0]]]\nblocks = [{ kind = \"sphere\", radius = 1.0 }]\n";
        let spec = parse_metric(text, "f").unwrap();
        assert_eq!(spec.n(), 6);
        assert_eq!(spec.h().to_string(), "u*x2^2 + x3^2");
    }

    #[test]
    fn written_files_read_back() {
        for name in ["cw4_order2_x_sphere", "random_1", "scrambled_cw4_order2"] {
            let spec = spaces::fixture(name).unwrap();
            let back = parse_metric(&write_metric(&spec, &[]), "f").unwrap();
            let p = spec.center();
            assert_eq!(back.domain(), spec.domain());
            assert_eq!(back.h().eval(&p.values()).unwrap(), spec.h().eval(&p.values()).unwrap(), "{name}");
            assert_eq!(back.leaf_metric_at(&p).unwrap(), spec.leaf_metric_at(&p).unwrap());
        }
    }
}
