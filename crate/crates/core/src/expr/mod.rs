//! Coefficient expressions over real coordinates `z0..z31`.
//!
//! Expressions are real-valued except for `i{k}` literals, which may only enter
//! linearly (`a + b*i1 + ...`). That keeps evaluation well defined without any
//! bracketing rules.

mod parse;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::CdNumber;
use crate::error::{Error, Result};

pub use parse::parse;

/// Highest coordinate index accepted by the grammar.
pub const MAX_COORD: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "ln" => Func::Ln,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    /// Generator literal `i{k}`.
    Unit(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Partially evaluated value: real unless a generator literal was involved.
#[derive(Debug, Clone)]
enum Value {
    Real(f64),
    Cd(CdNumber),
}

impl Value {
    fn into_cd(self) -> CdNumber {
        match self {
            Value::Real(x) => CdNumber::real(0, x),
            Value::Cd(z) => z,
        }
    }
}

fn level_for_index(k: usize) -> u32 {
    (k + 1).next_power_of_two().trailing_zeros()
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(j: usize) -> Expr {
        Expr::Var(j)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::Num(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
            _ if b.is_one() => a,
            _ if a.is_zero() && !b.is_zero() => Expr::Num(0.0),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        match (&a, n) {
            (_, 0) => Expr::Num(1.0),
            (_, 1) => a,
            (Expr::Num(x), _) => Expr::Num(x.powi(n as i32)),
            _ => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(x) => Expr::Num(-x),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        if let Expr::Num(x) = a {
            let v = match f {
                Func::Exp => Some(x.exp()),
                Func::Sin => Some(x.sin()),
                Func::Cos => Some(x.cos()),
                Func::Sqrt if x >= 0.0 => Some(x.sqrt()),
                Func::Ln if x > 0.0 => Some(x.ln()),
                _ => None,
            };
            if let Some(v) = v {
                return Expr::Num(v);
            }
        }
        Expr::Call(f, Box::new(a))
    }

    /// A real square root `a` with `a^2 = self`. Constants and even powers are
    /// folded so the root stays differentiable where the radicand vanishes.
    pub fn sqrt_root(&self) -> Expr {
        match self {
            Expr::Num(x) if *x >= 0.0 => Expr::Num(x.sqrt()),
            Expr::Pow(base, n) if n % 2 == 0 => Expr::pow((**base).clone(), n / 2),
            Expr::Mul(a, b) => {
                let (ra, rb) = (a.sqrt_root(), b.sqrt_root());
                if matches!(ra, Expr::Call(Func::Sqrt, _)) && matches!(rb, Expr::Call(Func::Sqrt, _)) {
                    Expr::call(Func::Sqrt, self.clone())
                } else {
                    Expr::mul(ra, rb)
                }
            }
            _ => Expr::call(Func::Sqrt, self.clone()),
        }
    }

    /// True when no generator literal occurs.
    pub fn is_real(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => true,
            Expr::Unit(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_real() && b.is_real(),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.is_real(),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(j) => Some(*j),
            Expr::Num(_) | Expr::Unit(_) => None,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.max_var().max(b.max_var()),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
        }
    }

    /// Level needed to hold the value: the smallest level containing every `i{k}`.
    pub fn level(&self) -> u32 {
        match self {
            Expr::Unit(k) => level_for_index(*k),
            Expr::Num(_) | Expr::Var(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.level().max(b.level()),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.level(),
        }
    }

    pub fn depends_on(&self, j: usize) -> bool {
        match self {
            Expr::Var(k) => *k == j,
            Expr::Num(_) | Expr::Unit(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.depends_on(j) || b.depends_on(j),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(j),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    fn eval_err(point: &[f64], message: &str) -> Error {
        Error::Eval { point: point.to_vec(), message: message.to_string() }
    }

    /// Real evaluation; fails if a generator literal occurs.
    pub fn eval_real(&self, point: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Var(j) => *point.get(*j).ok_or_else(|| Self::eval_err(point, &format!("coordinate z{j} missing")))?,
            Expr::Unit(_) => return Err(Self::eval_err(point, "generator literal in a real context")),
            Expr::Add(a, b) => a.eval_real(point)? + b.eval_real(point)?,
            Expr::Sub(a, b) => a.eval_real(point)? - b.eval_real(point)?,
            Expr::Mul(a, b) => a.eval_real(point)? * b.eval_real(point)?,
            Expr::Div(a, b) => {
                let d = b.eval_real(point)?;
                if d == 0.0 {
                    return Err(Self::eval_err(point, "division by zero"));
                }
                a.eval_real(point)? / d
            }
            Expr::Pow(a, n) => a.eval_real(point)?.powi(*n as i32),
            Expr::Neg(a) => -a.eval_real(point)?,
            Expr::Call(f, a) => {
                let x = a.eval_real(point)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(Self::eval_err(point, "sqrt of a negative number"));
                        }
                        x.sqrt()
                    }
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(Self::eval_err(point, "ln of a non-positive number"));
                        }
                        x.ln()
                    }
                }
            }
        })
    }

    fn eval_value(&self, point: &[f64]) -> Result<Value> {
        if self.is_real() {
            return Ok(Value::Real(self.eval_real(point)?));
        }
        Ok(match self {
            Expr::Unit(k) => Value::Cd(CdNumber::basis(level_for_index(*k), *k)),
            Expr::Add(a, b) => Value::Cd(&a.eval_value(point)?.into_cd() + &b.eval_value(point)?.into_cd()),
            Expr::Sub(a, b) => Value::Cd(&a.eval_value(point)?.into_cd() - &b.eval_value(point)?.into_cd()),
            Expr::Neg(a) => Value::Cd(-a.eval_value(point)?.into_cd()),
            Expr::Mul(a, b) => match (a.eval_value(point)?, b.eval_value(point)?) {
                (Value::Real(x), Value::Cd(z)) | (Value::Cd(z), Value::Real(x)) => Value::Cd(z.scale(x)),
                (Value::Real(x), Value::Real(y)) => Value::Real(x * y),
                (Value::Cd(_), Value::Cd(_)) => {
                    return Err(Self::eval_err(point, "product of two hypercomplex factors"));
                }
            },
            Expr::Div(a, b) => {
                let d = b.eval_real(point)?;
                if d == 0.0 {
                    return Err(Self::eval_err(point, "division by zero"));
                }
                Value::Cd(a.eval_value(point)?.into_cd().scale(1.0 / d))
            }
            _ => return Err(Self::eval_err(point, "generator literal outside a linear combination")),
        })
    }

    /// Evaluate at a point; real-valued expressions give a level-0 number.
    pub fn eval(&self, point: &[f64]) -> Result<CdNumber> {
        Ok(self.eval_value(point)?.into_cd())
    }

    /// Symbolic partial derivative with respect to `z_j`.
    pub fn diff(&self, j: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Unit(_) => Expr::Num(0.0),
            Expr::Var(k) => Expr::Num(if *k == j { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.diff(j), b.diff(j)),
            Expr::Sub(a, b) => Expr::sub(a.diff(j), b.diff(j)),
            Expr::Neg(a) => Expr::neg(a.diff(j)),
            Expr::Mul(a, b) => Expr::add(Expr::mul(a.diff(j), (**b).clone()), Expr::mul((**a).clone(), b.diff(j))),
            Expr::Div(a, b) => {
                let da = a.diff(j);
                let db = b.diff(j);
                if db.is_zero() {
                    Expr::div(da, (**b).clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                        Expr::pow((**b).clone(), 2),
                    )
                }
            }
            Expr::Pow(_, 0) => Expr::Num(0.0),
            Expr::Pow(a, n) => {
                let da = a.diff(j);
                Expr::mul(Expr::mul(Expr::Num(*n as f64), Expr::pow((**a).clone(), n - 1)), da)
            }
            Expr::Call(f, a) => {
                let da = a.diff(j);
                if da.is_zero() {
                    return Expr::Num(0.0);
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Sqrt => Expr::div(Expr::Num(0.5), self.clone()),
                    Func::Ln => Expr::div(Expr::Num(1.0), inner),
                };
                Expr::mul(outer, da)
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(x) if x.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.prec();
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(j) => write!(f, "z{j}"),
            Expr::Unit(k) => write!(f, "i{k}"),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => "+",
                    Expr::Sub(..) => "-",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                a.fmt_child(f, a.prec() < p)?;
                write!(f, "{op}")?;
                b.fmt_child(f, b.prec() <= p)
            }
            Expr::Pow(a, n) => {
                a.fmt_child(f, a.prec() < 4)?;
                write!(f, "^{n}")
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, a.prec() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s, MAX_COORD + 1).map_err(serde::de::Error::custom)
    }
}
