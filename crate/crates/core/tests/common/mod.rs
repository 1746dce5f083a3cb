#![allow(dead_code)]

use brinkmann::expr::{parse, ParseError, Var};
use brinkmann::symbolic::{mul, num, pow, sum, var};
use brinkmann::{ChartPoint, Expr, Jet};
use rand::Rng;

/// Polynomial in `u, x2, ..., x{dim-1}` with up to 5 terms of degree ≤ 4.
pub fn random_polynomial(rng: &mut impl Rng, dim: usize) -> Expr {
    let terms = rng.random_range(1..=5);
    sum((0..terms).map(|_| {
        let c = (rng.random_range(-2.0..2.0) * 1000.0_f64).round() / 1000.0;
        let mut t = num(c);
        let mut deg = 0;
        for slot in 0..dim - 1 {
            let k = rng.random_range(0..=2);
            if k > 0 && deg + k <= 4 {
                t = mul(t, pow(var(Var::from_slot(slot)), k));
                deg += k;
            }
        }
        t
    }))
}

/// Relative error of jet first and second partials against central differences.
pub fn jet_vs_fd(e: &Expr, p: &ChartPoint) -> f64 {
    let vals = p.values();
    let nv = vals.len();
    let jet = e.eval_jet(&brinkmann::chart::seeds(p, 2)).unwrap();
    let f = |v: &[f64]| e.eval(v).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for a in 0..nv {
        let mut alpha = vec![0u8; nv];
        alpha[a] = 1;
        let (mut vp, mut vm) = (vals.clone(), vals.clone());
        vp[a] += h;
        vm[a] -= h;
        let fd = (f(&vp) - f(&vm)) / (2.0 * h);
        let d = jet.partial(&alpha).unwrap();
        worst = worst.max((d - fd).abs() / (1.0 + fd.abs()));
        for b in 0..nv {
            let mut ab = alpha.clone();
            ab[b] += 1;
            let corner = |sa: f64, sb: f64| {
                let mut v = vals.clone();
                v[a] += sa * h;
                v[b] += sb * h;
                f(&v)
            };
            let fd2 = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            let d2 = jet.partial(&ab).unwrap();
            worst = worst.max((d2 - fd2).abs() / (1.0 + fd2.abs()));
        }
    }
    worst
}

pub fn random_jet(rng: &mut impl Rng, nv: usize, order: usize) -> Jet {
    let len = brinkmann::jet::JetShape::get(nv, order).len();
    Jet::from_coeffs(nv, order, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Max deviation over commutativity, associativity, distributivity and units.
pub fn ring_axiom_defect(a: &Jet, b: &Jet, c: &Jet) -> f64 {
    let d = |x: &Jet, y: &Jet| (x - y).max_abs();
    let one = a.constant_like(1.0);
    let zero = a.constant_like(0.0);
    [
        d(&(a + b), &(b + a)),
        d(&(a * b), &(b * a)),
        d(&(&(a + b) + c), &(a + &(b + c))),
        d(&(&(a * b) * c), &(a * &(b * c))),
        d(&(a * &(b + c)), &(&(a * b) + &(a * c))),
        d(&(a * &one), a),
        d(&(a + &zero), a),
        d(&(a - a), &zero),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Malformed inputs and the byte offset each diagnostic must point at.
pub const BAD_INPUTS: &[(&str, usize)] = &[
    ("x9", 0),
    ("u + v", 4),
    ("u^1.5", 2),
    ("(u", 2),
    ("u $ 2", 2),
    ("sin(u", 5),
    ("u + * x2", 4),
    ("2*foo(u)", 2),
];

pub fn diagnostics_positioned() -> Result<(), String> {
    for (text, want) in BAD_INPUTS {
        match parse(text, 4) {
            Err(e @ (ParseError::Syntax { .. }
            | ParseError::UnknownIdentifier { .. }
            | ParseError::VariableV { .. }
            | ParseError::NonIntegerExponent { .. })) => {
                if e.offset() != Some(*want) {
                    return Err(format!("{text:?}: offset {:?}, expected {want}", e.offset()));
                }
            }
            other => return Err(format!("{text:?}: {other:?}")),
        }
    }
    Ok(())
}
