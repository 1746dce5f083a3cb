//! Expression language for the metric functions `H`, `W_i`, `g_ij`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' '-'? integer)?
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `u` and `x2` .. `x{n-1}`; functions are `sin`, `cos`,
//! `exp`, `sqrt`.

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, JetError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("at offset {offset}: unknown identifier `{name}`")]
    UnknownIdentifier { offset: usize, name: String },
    #[error(
        "at offset {offset}: `v` may not appear; metric functions of a Brinkmann chart are independent of v"
    )]
    VariableV { offset: usize },
    #[error("at offset {offset}: exponent must be an integer literal")]
    NonIntegerExponent { offset: usize },
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableV { offset }
            | ParseError::NonIntegerExponent { offset } => Some(*offset),
            ParseError::Dimension(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("variable {0} has no value at this point")]
    MissingVariable(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Chart variable. `Var(0)` is `u`; `Var(i)` for `i ≥ 2` is `x^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

impl Var {
    pub const U: Var = Var(0);

    pub fn x(i: usize) -> Var {
        assert!(i >= 2, "leaf coordinates start at x2");
        Var(i)
    }

    /// Position in a `[u, x2, x3, ...]` value array.
    pub fn slot(self) -> usize {
        if self.0 == 0 {
            0
        } else {
            self.0 - 1
        }
    }

    pub fn from_slot(slot: usize) -> Var {
        if slot == 0 {
            Var(0)
        } else {
            Var(slot + 1)
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            write!(f, "u")
        } else {
            write!(f, "x{}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn syntax<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { offset, message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let start = {
            self.skip_ws();
            self.pos
        };
        let negative = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ParseError::NonIntegerExponent { offset: start });
        }
        if self.pos < self.bytes.len()
            && matches!(self.bytes[self.pos], b'.' | b'e' | b'E' | b'a'..=b'z' | b'A'..=b'Z' | b'_')
        {
            return Err(ParseError::NonIntegerExponent { offset: start });
        }
        let text = &self.src[digits_start..self.pos];
        let mut exponent: i32 = match text.parse() {
            Ok(e) => e,
            Err(_) => return self.syntax(digits_start, "exponent too large"),
        };
        if negative {
            exponent = -exponent;
        }
        if self.peek() == Some(b'^') {
            return self.syntax(self.pos, "chained `^` is ambiguous; add parentheses");
        }
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.bytes.get(self.pos).copied() {
            None => self.syntax(start, "unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.syntax(self.pos, "expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(start),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(start),
            Some(_) => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                self.syntax(start, format!("unexpected character `{ch}`"))
            }
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr, ParseError> {
        let b = self.bytes;
        while self.pos < b.len() && b[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < b.len() && b[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'+' || b[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
                return self.syntax(save, "malformed exponent in number");
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => self.syntax(start, format!("malformed number `{text}`")),
        }
    }

    fn ident(&mut self, start: usize) -> Result<Expr, ParseError> {
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(func) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return self.syntax(self.pos, format!("expected `(` after `{name}`"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return self.syntax(self.pos, "expected `)`");
            }
            self.pos += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if name == "u" {
            return Ok(Expr::Var(Var::U));
        }
        if name == "v" {
            return Err(ParseError::VariableV { offset: start });
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && !rest.starts_with('0') && rest.bytes().all(|c| c.is_ascii_digit()) {
                if let Ok(i) = rest.parse::<usize>() {
                    if (2..self.dim).contains(&i) {
                        return Ok(Expr::Var(Var(i)));
                    }
                }
            }
        }
        Err(ParseError::UnknownIdentifier { offset: start, name: name.to_string() })
    }
}

/// Parses `text` for a chart of dimension `dim`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    if dim < 3 {
        return Err(ParseError::Dimension(dim));
    }
    parse_any(text, dim)
}

/// Like [`parse`] but also accepts `dim = 2` (charts without leaf coordinates).
pub fn parse_any(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text, bytes: text.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    if p.peek().is_some() {
        let ch = text[p.pos..].chars().next().unwrap_or('?');
        return p.syntax(p.pos, format!("unexpected `{ch}`"));
    }
    Ok(e)
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<Var> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(v) => Some(*v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Bin(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Bin(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Scalar evaluation; `values` is `[u, x2, x3, ...]`.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => *values
                .get(v.slot())
                .ok_or_else(|| EvalError::MissingVariable(v.to_string()))?,
            Expr::Neg(a) => -a.eval(values)?,
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(values)?, b.eval(values)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                }
            }
            Expr::Pow(a, n) => {
                let x = a.eval(values)?;
                if *n < 0 && x == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                x.powi(*n)
            }
            Expr::Call(f, a) => {
                let x = a.eval(values)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => {
                        if x <= 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", value: x });
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    /// Jet evaluation. `seeds[k]` is the jet of the variable in slot `k`
    /// (`u`, `x2`, ...); all seeds share one shape.
    pub fn eval_jet(&self, seeds: &[Jet]) -> Result<Jet, EvalError> {
        let proto = seeds.first().ok_or_else(|| EvalError::MissingVariable("u".into()))?;
        self.eval_jet_inner(seeds, proto)
    }

    fn eval_jet_inner(&self, seeds: &[Jet], proto: &Jet) -> Result<Jet, EvalError> {
        Ok(match self {
            Expr::Num(v) => proto.constant_like(*v),
            Expr::Var(v) => seeds
                .get(v.slot())
                .cloned()
                .ok_or_else(|| EvalError::MissingVariable(v.to_string()))?,
            Expr::Neg(a) => -a.eval_jet_inner(seeds, proto)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval_jet_inner(seeds, proto)?;
                // Constant right operands are common (`x2^2*3`, `x/2`); skip the convolution.
                if let Expr::Num(c) = **b {
                    return Ok(match op {
                        BinOp::Add => x.add_scalar(c),
                        BinOp::Sub => x.add_scalar(-c),
                        BinOp::Mul => x.scale(c),
                        BinOp::Div => {
                            if c == 0.0 {
                                return Err(EvalError::DivisionByZero);
                            }
                            x.scale(1.0 / c)
                        }
                    });
                }
                let y = b.eval_jet_inner(seeds, proto)?;
                match op {
                    BinOp::Add => &x + &y,
                    BinOp::Sub => &x - &y,
                    BinOp::Mul => &x * &y,
                    BinOp::Div => x.try_div(&y).map_err(|e| match e {
                        JetError::DivisionByZero => EvalError::DivisionByZero,
                        other => EvalError::Jet(other),
                    })?,
                }
            }
            Expr::Pow(a, n) => {
                let x = a.eval_jet_inner(seeds, proto)?;
                x.powi(*n).map_err(|e| match e {
                    JetError::DivisionByZero => EvalError::DivisionByZero,
                    other => EvalError::Jet(other),
                })?
            }
            Expr::Call(f, a) => {
                let x = a.eval_jet_inner(seeds, proto)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x.sqrt().map_err(|e| match e {
                        JetError::Domain { func, value } => EvalError::Domain { func, value },
                        other => EvalError::Jet(other),
                    })?,
                }
            }
        })
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => {
                let a = v.abs();
                let text = if a.fract() == 0.0 && a < 1e15 { format!("{a}") } else { format!("{a:?}") };
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{text})")
                } else {
                    write!(f, "{text}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, lmin, rmin) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                };
                a.write_at(f, lmin)?;
                write!(f, "{sym}")?;
                b.write_at(f, rmin)
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse("u*x2^2 + 3", 4).unwrap();
        assert_eq!(e.eval(&[2.0, 3.0, 0.0]).unwrap(), 21.0);
        let e = parse("-u^2", 4).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(Var::U)), 2))));
        assert_eq!(parse("2-3-4", 3).unwrap().eval(&[0.0, 0.0]).unwrap(), -5.0);
        assert_eq!(parse("8/4/2", 3).unwrap().eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(parse("x2^-2", 3).unwrap().eval(&[0.0, 2.0]).unwrap(), 0.25);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse("x9", 4),
            Err(ParseError::UnknownIdentifier { offset: 0, name: "x9".into() })
        );
        assert_eq!(parse("u + v", 4), Err(ParseError::VariableV { offset: 4 }));
        assert_eq!(parse("u^1.5", 4), Err(ParseError::NonIntegerExponent { offset: 2 }));
        assert_eq!(parse("u^x2", 4), Err(ParseError::NonIntegerExponent { offset: 2 }));
        assert!(matches!(parse("(u", 4), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("u^2^3", 4), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("u $ 2", 4), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x1", 4), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x02", 4), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("u", 2), Err(ParseError::Dimension(2))));
    }

    #[test]
    fn jet_division_by_zero() {
        let e = parse("sin(u)/x2", 4).unwrap();
        let seeds = vec![
            Jet::seed(0, 0.5, 3, 2).unwrap(),
            Jet::seed(1, 0.0, 3, 2).unwrap(),
            Jet::seed(2, 0.0, 3, 2).unwrap(),
        ];
        assert_eq!(e.eval_jet(&seeds), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn jet_examples() {
        let seeds = |u: f64, x: f64, k: usize| {
            vec![Jet::seed(0, u, 2, k).unwrap(), Jet::seed(1, x, 2, k).unwrap()]
        };
        let j = parse("x2^2", 3).unwrap().eval_jet(&seeds(0.0, 1.0, 2)).unwrap();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.partial(&[0, 1]).unwrap(), 2.0);
        assert_eq!(j.partial(&[0, 2]).unwrap(), 2.0);

        let j = parse("u*x2", 3).unwrap().eval_jet(&seeds(0.0, 0.0, 2)).unwrap();
        for (alpha, c) in j.shape().monomials().iter().zip(j.coeffs()) {
            let expect = if alpha == &vec![1, 1] { 1.0 } else { 0.0 };
            assert_eq!(*c, expect);
        }

        let seeds1 = vec![Jet::seed(0, 0.0, 1, 3).unwrap()];
        let j = parse("exp(u)", 3).unwrap().eval_jet(&seeds1).unwrap();
        for k in 0..=3u8 {
            assert!((j.partial(&[k]).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn printing() {
        let cases = [
            ("u*x2^2 + 3", "u*x2^2 + 3"),
            ("-(u*x2)", "-(u*x2)"),
            ("(-u)^2", "(-u)^2"),
        ];
        for (src, printed) in cases {
            let e = parse(src, 4).unwrap();
            assert_eq!(e.to_string(), printed);
            assert_eq!(parse(&e.to_string(), 4).unwrap(), e);
        }
        assert_eq!(Expr::Num(-2.5).to_string(), "(-2.5)");
        assert_eq!(parse("u - (x2 - x3)", 4).unwrap().to_string(), "u - (x2 - x3)");
        assert_eq!(parse("u/(x2*x3)", 4).unwrap().to_string(), "u/(x2*x3)");
        assert_eq!(parse("1e-7*u", 4).unwrap().to_string(), "1e-7*u");
    }
}
