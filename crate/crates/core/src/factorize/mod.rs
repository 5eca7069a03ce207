//! First-order hypercomplex factors `Υ`, `Υ₁` and remainder `Q` with
//! `A f = Υ(Υ₁ f) + Q f`.

mod build;
mod operator;
mod verify;


use std::fmt;

use serde::Serialize;

use crate::algebra::{Ccd, CdNumber};
use crate::error::Result;
use crate::expr::Expr;

pub use build::{
    choose_level, choose_level_binomial, compose_elliptic, factorize, factorize_general, lift_corollary_check,
    polar_sqrt, slot_identity_residual, FactorOptions, LiftCheck, Slot,
};
pub use operator::{
    multi_order, parse_cd_literal, shift_vars, substitute_zero, Block, DerivCache, DiffOp, DiffTerm, OperatorSpec,
};
pub use verify::{
    gaussian, is_polynomial, random_polynomial, verify_factorization, Grid, VerifyMode, VerifyOptions, VerifyReport,
};

/// Real scalar expression times a constant unit of the complexified algebra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffTerm {
    pub scalar: Expr,
    pub unit: Ccd,
}

impl CoeffTerm {
    pub fn eval(&self, x: &[f64]) -> Result<Ccd> {
        Ok(self.unit.scale(self.scalar.eval_real(x)?))
    }
}

/// `(∂^α f) · Σ scalar·unit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperTerm {
    pub alpha: Vec<u32>,
    pub coeff: Vec<CoeffTerm>,
}

/// `Υ f = Σ_α (∂^α f) φ_α + f β` with coefficients in the complexified algebra,
/// acting by right multiplication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperOp {
    pub dimension: usize,
    pub level: u32,
    pub terms: Vec<HyperTerm>,
    pub zero_order: Vec<CoeffTerm>,
}

/// Alias used for the order-one case.
pub type FirstOrderOp = HyperOp;

pub(crate) fn sum_terms(terms: &[CoeffTerm], x: &[f64], level: u32) -> Result<Ccd> {
    let mut acc = Ccd::zero(level);
    for t in terms {
        acc += &t.eval(x)?;
    }
    Ok(acc)
}

impl HyperOp {
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|t| multi_order(&t.alpha)).max().unwrap_or(0)
    }

    /// Coefficient `φ_α(x)` of the term with multi-index `alpha`.
    pub fn coefficient(&self, alpha: &[u32], x: &[f64]) -> Result<Ccd> {
        let mut acc = Ccd::zero(self.level);
        for t in self.terms.iter().filter(|t| t.alpha == alpha) {
            acc += &sum_terms(&t.coeff, x, self.level)?;
        }
        Ok(acc)
    }

    /// Apply to a hypercomplex-valued expression using symbolic derivatives.
    pub fn apply(&self, f: &mut DerivCache, x: &[f64]) -> Result<Ccd> {
        let mut acc = Ccd::zero(self.level);
        for t in &self.terms {
            let d = Ccd::from_real(f.get(&t.alpha).eval(x)?);
            acc += &d.mul(&sum_terms(&t.coeff, x, self.level)?);
        }
        if !self.zero_order.is_empty() {
            let v = Ccd::from_real(f.base().eval(x)?);
            acc += &v.mul(&sum_terms(&self.zero_order, x, self.level)?);
        }
        Ok(acc)
    }

    /// Every coefficient is constant and free of `𝐢`; returns `(t_j, β)`.
    pub fn constant_first_order(&self) -> Option<(Vec<CdNumber>, CdNumber)> {
        if self.order() > 1 {
            return None;
        }
        let mut t = vec![CdNumber::zero(self.level); self.dimension];
        let constant = |terms: &[CoeffTerm]| -> Option<CdNumber> {
            let mut acc = Ccd::zero(self.level);
            for c in terms {
                acc += &c.unit.scale(c.scalar.as_const()?);
            }
            (acc.im.norm() == 0.0).then_some(acc.re)
        };
        for term in &self.terms {
            let Some(j) = term.alpha.iter().position(|&a| a == 1) else {
                return None;
            };
            t[j] += &constant(&term.coeff)?;
        }
        let beta = constant(&self.zero_order)?;
        Some((t, beta))
    }
}

fn fmt_units(c: &Ccd) -> String {
    let re = c.re.norm() > 0.0;
    let im = c.im.norm() > 0.0;
    match (re, im) {
        (false, false) => "0".into(),
        (true, false) => format!("{}", c.re),
        (false, true) => format!("I*({})", c.im),
        (true, true) => format!("{} + I*({})", c.re, c.im),
    }
}

fn fmt_alpha(alpha: &[u32]) -> String {
    let parts: Vec<String> = alpha
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(j, &k)| if k == 1 { format!("d{j}") } else { format!("d{j}^{k}") })
        .collect();
    if parts.is_empty() {
        "f".into()
    } else {
        format!("{} f", parts.join(" "))
    }
}

impl fmt::Display for HyperOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            Ok(())
        };
        for t in &self.terms {
            for c in &t.coeff {
                sep(f)?;
                write!(f, "({}) [{}] [{}]", fmt_alpha(&t.alpha), c.scalar, fmt_units(&c.unit))?;
            }
        }
        for c in &self.zero_order {
            sep(f)?;
            write!(f, "f [{}] [{}]", c.scalar, fmt_units(&c.unit))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// `((∂^deriv f · scalar) · right[0]) · right[1] ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderTerm {
    pub scalar: Expr,
    pub deriv: Vec<u32>,
    pub right: Vec<Ccd>,
}

impl RemainderTerm {
    pub fn eval(&self, f: &mut DerivCache, x: &[f64]) -> Result<Ccd> {
        let d = f.get(&self.deriv).eval(x)?;
        let mut v = Ccd::from_real(d.mul(&self.scalar.eval(x)?));
        for r in &self.right {
            v = v.mul(r);
        }
        Ok(v)
    }
}

impl fmt::Display for RemainderTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) [{}]", fmt_alpha(&self.deriv), self.scalar)?;
        for r in &self.right {
            write!(f, " [{}]", fmt_units(r))?;
        }
        Ok(())
    }
}

/// `A f = Υ(Υ₁ f) + Q f`.
#[derive(Debug, Clone, Serialize)]
pub struct Factorization {
    pub dimension: usize,
    /// Level `r` of the block coefficients (0 when all are real).
    pub base_level: u32,
    pub level: u32,
    pub upsilon: HyperOp,
    pub upsilon1: HyperOp,
    pub remainder: Vec<RemainderTerm>,
    pub slots: Vec<Slot>,
    #[serde(skip)]
    pub operator: DiffOp,
}

impl Factorization {
    pub fn remainder_order(&self) -> u32 {
        self.remainder.iter().filter(|t| !t.scalar.is_zero()).map(|t| multi_order(&t.deriv)).max().unwrap_or(0)
    }

    /// `Q f` at `x`.
    pub fn apply_remainder(&self, f: &mut DerivCache, x: &[f64]) -> Result<Ccd> {
        let mut acc = Ccd::zero(self.level);
        for t in &self.remainder {
            acc += &t.eval(f, x)?;
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}
