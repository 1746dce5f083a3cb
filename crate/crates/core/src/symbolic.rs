//! Folding constructors, substitution and differentiation on [`Expr`] trees.
//!
//! Only chart changes need this; the curvature pipeline differentiates with
//! jets.

use crate::expr::{BinOp, Expr, Func, Var};

pub fn num(v: f64) -> Expr {
    Expr::Num(v)
}

pub fn var(v: Var) -> Expr {
    Expr::Var(v)
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => return Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => return b,
        (_, Some(y)) if y == 0.0 => return a,
        (_, Some(y)) if y < 0.0 => return Expr::Bin(BinOp::Sub, Box::new(a), Box::new(Expr::Num(-y))),
        _ => {}
    }
    match b {
        Expr::Neg(inner) => Expr::Bin(BinOp::Sub, Box::new(a), inner),
        b => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => return Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => return neg(b),
        (_, Some(y)) if y == 0.0 => return a,
        (_, Some(y)) if y < 0.0 => return Expr::Bin(BinOp::Add, Box::new(a), Box::new(Expr::Num(-y))),
        _ => {}
    }
    match b {
        Expr::Neg(inner) => Expr::Bin(BinOp::Add, Box::new(a), inner),
        b => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => return Expr::Num(x * y),
        (Some(x), _) if x == 0.0 => return Expr::Num(0.0),
        (_, Some(y)) if y == 0.0 => return Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => return b,
        (_, Some(y)) if y == 1.0 => return a,
        (Some(x), _) if x == -1.0 => return neg(b),
        (_, Some(y)) if y == -1.0 => return neg(a),
        (Some(x), _) if x < 0.0 => return neg(mul(Expr::Num(-x), b)),
        _ => {}
    }
    match (a, b) {
        (Expr::Neg(x), Expr::Neg(y)) => mul(*x, *y),
        (Expr::Neg(x), y) => neg(mul(*x, y)),
        (x, Expr::Neg(y)) => neg(mul(x, *y)),
        (x, y) => Expr::Bin(BinOp::Mul, Box::new(x), Box::new(y)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => return Expr::Num(x / y),
        (Some(x), _) if x == 0.0 => return Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => return a,
        (_, Some(y)) if y == -1.0 => return neg(a),
        _ => {}
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

pub fn pow(a: Expr, n: i32) -> Expr {
    if n == 0 {
        return Expr::Num(1.0);
    }
    if n == 1 {
        return a;
    }
    if let Some(x) = as_num(&a) {
        if x != 0.0 || n > 0 {
            return Expr::Num(x.powi(n));
        }
    }
    match a {
        Expr::Neg(inner) if n % 2 == 0 => pow(*inner, n),
        Expr::Neg(inner) => neg(pow(*inner, n)),
        a => Expr::Pow(Box::new(a), n),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    if let Some(x) = as_num(&a) {
        match f {
            Func::Sin => return Expr::Num(x.sin()),
            Func::Cos => return Expr::Num(x.cos()),
            Func::Exp => return Expr::Num(x.exp()),
            Func::Sqrt if x > 0.0 => return Expr::Num(x.sqrt()),
            Func::Sqrt => {}
        }
    }
    Expr::Call(f, Box::new(a))
}

/// Sum of many terms.
pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
    terms.into_iter().fold(Expr::Num(0.0), add)
}

/// Simultaneous substitution; variables without an image stay as they are.
pub fn substitute(e: &Expr, image: &dyn Fn(Var) -> Option<Expr>) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(*v),
        Expr::Var(v) => image(*v).unwrap_or(Expr::Var(*v)),
        Expr::Neg(a) => neg(substitute(a, image)),
        Expr::Bin(op, a, b) => {
            let (a, b) = (substitute(a, image), substitute(b, image));
            match op {
                BinOp::Add => add(a, b),
                BinOp::Sub => sub(a, b),
                BinOp::Mul => mul(a, b),
                BinOp::Div => div(a, b),
            }
        }
        Expr::Pow(a, n) => pow(substitute(a, image), *n),
        Expr::Call(f, a) => call(*f, substitute(a, image)),
    }
}

/// Rebuilds a tree through the folding constructors.
pub fn simplify(e: &Expr) -> Expr {
    substitute(e, &|_| None)
}

pub fn diff(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, v)),
        Expr::Bin(op, a, b) => {
            let (da, db) = (diff(a, v), diff(b, v));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                BinOp::Div => {
                    if db.is_zero() {
                        div(da, b)
                    } else {
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2))
                    }
                }
            }
        }
        Expr::Pow(a, n) => {
            let da = diff(a, v);
            mul(mul(Expr::Num(*n as f64), pow((**a).clone(), n - 1)), da)
        }
        Expr::Call(f, a) => {
            let da = diff(a, v);
            if da.is_zero() {
                return Expr::Num(0.0);
            }
            let a = (**a).clone();
            match f {
                Func::Sin => mul(call(Func::Cos, a), da),
                Func::Cos => neg(mul(call(Func::Sin, a), da)),
                Func::Exp => mul(call(Func::Exp, a), da),
                Func::Sqrt => div(da, mul(Expr::Num(2.0), call(Func::Sqrt, a))),
            }
        }
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::Num(1.0),
        1 => m[0][0].clone(),
        2 => sub(mul(m[0][0].clone(), m[1][1].clone()), mul(m[0][1].clone(), m[1][0].clone())),
        _ => {
            let mut terms = Vec::new();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let t = mul(m[0][j].clone(), det(&minor(m, 0, j)));
                terms.push(if j % 2 == 0 { t } else { neg(t) });
            }
            sum(terms)
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Inverse by the adjugate formula. Numeric matrices fold to numbers.
pub fn inverse(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![div(Expr::Num(1.0), m[0][0].clone())]];
    }
    let d = det(m);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = det(&minor(m, j, i));
                    let c = if (i + j) % 2 == 0 { c } else { neg(c) };
                    div(c, d.clone())
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn close(a: &Expr, b: &Expr, vals: &[f64]) -> bool {
        (a.eval(vals).unwrap() - b.eval(vals).unwrap()).abs() < 1e-12
    }

    #[test]
    fn folding() {
        assert_eq!(mul(num(1.0), var(Var::U)), var(Var::U));
        assert_eq!(add(num(0.0), var(Var::U)), var(Var::U));
        assert_eq!(mul(num(2.0), num(3.0)), num(6.0));
        assert_eq!(add(var(Var::U), num(-2.0)).to_string(), "u - 2");
        assert_eq!(mul(num(-1.0), var(Var::U)).to_string(), "-u");
    }

    #[test]
    fn derivative_rules() {
        let e = parse("sin(u*x2)/(1 + x2^2) + sqrt(2 + u^2)*exp(x2) - cos(u)", 3).unwrap();
        let du = diff(&e, Var::U);
        let h = 1e-6;
        for &(u, x) in &[(0.3, 0.2), (-0.7, 1.1)] {
            let fd = (e.eval(&[u + h, x]).unwrap() - e.eval(&[u - h, x]).unwrap()) / (2.0 * h);
            assert!((du.eval(&[u, x]).unwrap() - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = parse("x2 - 2*x3", 4).unwrap();
        let s = substitute(&e, &|v| match v.0 {
            2 => Some(var(Var(3))),
            3 => Some(var(Var(2))),
            _ => None,
        });
        assert!(close(&s, &parse("x3 - 2*x2", 4).unwrap(), &[0.0, 0.4, 0.9]));
    }

    #[test]
    fn symbolic_inverse() {
        let m = vec![
            vec![parse("cos(u)", 3).unwrap(), parse("-sin(u)", 3).unwrap()],
            vec![parse("sin(u)", 3).unwrap(), parse("cos(u)", 3).unwrap()],
        ];
        let inv = inverse(&m);
        assert!(close(&inv[0][1], &parse("sin(u)", 3).unwrap(), &[0.7, 0.0]));
        let m3: Vec<Vec<Expr>> = [[2.0, 1.0, 0.0], [0.0, 1.0, 3.0], [1.0, 0.0, 1.0]]
            .iter()
            .map(|r| r.iter().map(|&x| num(x)).collect())
            .collect();
        let inv = inverse(&m3);
        // [2 1 0; 0 1 3; 1 0 1] has determinant 5
        assert!(matches!(det(&m3), Expr::Num(d) if (d - 5.0).abs() < 1e-15));
        let row0: f64 = (0..3).map(|k| as_num(&m3[0][k]).unwrap() * as_num(&inv[k][0]).unwrap()).sum();
        assert!((row0 - 1.0).abs() < 1e-15);
    }
}
