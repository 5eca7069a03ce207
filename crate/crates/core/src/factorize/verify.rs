use rayon::prelude::*;
use serde::Serialize;

use super::build::diff_multi;
use super::{sum_terms, CoeffTerm, Factorization, HyperOp};
use crate::algebra::Ccd;
use crate::error::{Error, Result};
use crate::expr::{Expr, Func};

/// Tensor grid of `nodes` points per axis on `[lo, hi]^n`; residuals are taken
/// over interior nodes only.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub nodes: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { nodes: 17, lo: -1.0, hi: 1.0 }
    }
}

impl Grid {
    fn interior(&self) -> usize {
        self.nodes.saturating_sub(2)
    }

    pub fn interior_count(&self, n: usize) -> usize {
        self.interior().pow(n as u32)
    }

    fn point(&self, n: usize, mut idx: usize) -> Vec<f64> {
        let m = self.interior();
        let h = (self.hi - self.lo) / (self.nodes - 1) as f64;
        (0..n)
            .map(|_| {
                let k = idx % m;
                idx /= m;
                self.lo + (k + 1) as f64 * h
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Symbolic for polynomial tests, finite differences otherwise.
    Auto,
    Symbolic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub grid: Grid,
    pub mode: VerifyMode,
    pub fd_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { grid: Grid::default(), mode: VerifyMode::Auto, fd_step: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// `max |A f - (Υ(Υ₁ f) + Q f)|` over tests and interior nodes.
    pub max_residual: f64,
    /// `max |A f|` over the same set, for scale.
    pub max_scale: f64,
    pub per_test: Vec<f64>,
    pub modes: Vec<VerifyMode>,
    pub points: usize,
}

/// No function calls and no division by non-constants.
pub fn is_polynomial(e: &Expr) -> bool {
    match e {
        Expr::Num(_) | Expr::Var(_) | Expr::Unit(_) => true,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => is_polynomial(a) && is_polynomial(b),
        Expr::Div(a, b) => is_polynomial(a) && b.is_constant(),
        Expr::Pow(a, _) | Expr::Neg(a) => is_polynomial(a),
        Expr::Call(..) => false,
    }
}

fn times(e: &Expr, x: &[f64], unit: &Ccd, real: bool) -> Result<Ccd> {
    if real {
        Ok(unit.scale(e.eval_real(x)?))
    } else {
        Ok(Ccd::from_real(e.eval(x)?).mul(unit))
    }
}

/// Precomputed symbolic `Υ(Υ₁ f)`: items `(∂^α(e_τ ∂^β f), u_τ, outer term)`.
pub(crate) struct ProductPlan {
    items: Vec<(Expr, Ccd, usize)>,
    outer: Vec<Vec<CoeffTerm>>,
    level: u32,
    real: bool,
}

impl ProductPlan {
    pub(crate) fn new(upsilon: &HyperOp, upsilon1: &HyperOp, f: &Expr) -> Self {
        let mut items = Vec::new();
        for (o, outer) in upsilon.terms.iter().enumerate() {
            for inner in &upsilon1.terms {
                let df = diff_multi(f, &inner.alpha);
                for tau in &inner.coeff {
                    let d = diff_multi(&Expr::mul(df.clone(), tau.scalar.clone()), &outer.alpha);
                    if !d.is_zero() {
                        items.push((d, tau.unit.clone(), o));
                    }
                }
            }
        }
        ProductPlan {
            items,
            outer: upsilon.terms.iter().map(|t| t.coeff.clone()).collect(),
            level: upsilon.level.max(upsilon1.level),
            real: f.is_real(),
        }
    }

    pub(crate) fn eval(&self, x: &[f64]) -> Result<Ccd> {
        let phis = self.outer.iter().map(|c| sum_terms(c, x, self.level)).collect::<Result<Vec<_>>>()?;
        let mut acc = Ccd::zero(self.level);
        for (d, unit, o) in &self.items {
            acc += &times(d, x, unit, self.real)?.mul(&phis[*o]);
        }
        Ok(acc)
    }
}

/// `A f` and `Q f` as lists of `(∂^α f · coefficient) · chain`.
struct ChainPlan {
    items: Vec<(Expr, Vec<Ccd>)>,
    level: u32,
    real: bool,
}

impl ChainPlan {
    fn operator(fact: &Factorization, f: &Expr) -> Self {
        let items = fact
            .operator
            .terms
            .iter()
            .map(|t| {
                let e = Expr::mul(diff_multi(f, &t.alpha), t.coeff.clone());
                (e, t.right.iter().map(|c| Ccd::from_real(c.clone())).collect())
            })
            .collect();
        ChainPlan { items, level: fact.level, real: f.is_real() }
    }

    fn remainder(fact: &Factorization, f: &Expr) -> Self {
        let items = fact
            .remainder
            .iter()
            .map(|t| (Expr::mul(diff_multi(f, &t.deriv), t.scalar.clone()), t.right.clone()))
            .collect();
        ChainPlan { items, level: fact.level, real: f.is_real() }
    }

    fn eval(&self, x: &[f64]) -> Result<Ccd> {
        let one = Ccd::scalar(0, 1.0, 0.0);
        let mut acc = Ccd::zero(self.level);
        for (e, chain) in &self.items {
            let mut v = times(e, x, &one, self.real)?;
            for r in chain {
                v = v.mul(r);
            }
            acc += &v;
        }
        Ok(acc)
    }
}

/// Numeric `Υ₁ f` from symbolic derivatives of `f`.
struct InnerPlan {
    items: Vec<(Expr, Ccd)>,
    level: u32,
    real: bool,
}

impl InnerPlan {
    fn new(upsilon1: &HyperOp, f: &Expr) -> Self {
        let mut items = Vec::new();
        for t in &upsilon1.terms {
            let df = diff_multi(f, &t.alpha);
            for c in &t.coeff {
                items.push((Expr::mul(df.clone(), c.scalar.clone()), c.unit.clone()));
            }
        }
        InnerPlan { items, level: upsilon1.level, real: f.is_real() }
    }

    fn eval(&self, x: &[f64]) -> Result<Ccd> {
        let mut acc = Ccd::zero(self.level);
        for (e, unit) in &self.items {
            acc += &times(e, x, unit, self.real)?;
        }
        Ok(acc)
    }
}

/// `Υ g` with first derivatives of `g = Υ₁ f` from 5-point central differences.
fn fd_outer(upsilon: &HyperOp, inner: &InnerPlan, x: &[f64], h: f64) -> Result<Ccd> {
    let level = upsilon.level.max(inner.level);
    let mut acc = Ccd::zero(level);
    let mut y = x.to_vec();
    let mut at = |j: usize, dx: f64| -> Result<Ccd> {
        y[j] = x[j] + dx;
        let v = inner.eval(&y);
        y[j] = x[j];
        v
    };
    for t in &upsilon.terms {
        let phi = sum_terms(&t.coeff, x, level)?;
        let dg = match t.alpha.iter().position(|&k| k > 0) {
            None => inner.eval(x)?,
            Some(j) => {
                let (p2, p1, m1, m2) = (at(j, 2.0 * h)?, at(j, h)?, at(j, -h)?, at(j, -2.0 * h)?);
                let num = &(&(&m2 - &p2) + &p1.scale(8.0)) - &m1.scale(8.0);
                num.scale(1.0 / (12.0 * h))
            }
        };
        acc += &dg.mul(&phi);
    }
    if !upsilon.zero_order.is_empty() {
        acc += &inner.eval(x)?.mul(&sum_terms(&upsilon.zero_order, x, level)?);
    }
    Ok(acc)
}

/// Check `A f = Υ(Υ₁ f) + Q f` on every test function over the grid interior.
pub fn verify_factorization(fact: &Factorization, tests: &[Expr], opts: &VerifyOptions) -> Result<VerifyReport> {
    let n = fact.dimension;
    if opts.grid.nodes < 3 {
        return Err(Error::Spec("verification grid needs at least 3 nodes per axis".into()));
    }
    for f in tests {
        if f.max_var().is_some_and(|j| j >= n) {
            return Err(Error::Spec(format!("test function {f} uses a coordinate beyond dimension {n}")));
        }
    }
    let fd_ok = fact.upsilon.terms.iter().all(|t| super::multi_order(&t.alpha) <= 1);
    let points = opts.grid.interior_count(n);
    let mut report =
        VerifyReport { max_residual: 0.0, max_scale: 0.0, per_test: Vec::new(), modes: Vec::new(), points };
    for f in tests {
        let mode = match opts.mode {
            VerifyMode::Auto if is_polynomial(f) || !fd_ok => VerifyMode::Symbolic,
            VerifyMode::Auto => VerifyMode::FiniteDifference,
            VerifyMode::FiniteDifference if !fd_ok => {
                return Err(Error::Spec("finite-difference verification needs a first-order outer factor".into()))
            }
            m => m,
        };
        let a = ChainPlan::operator(fact, f);
        let q = ChainPlan::remainder(fact, f);
        let product = (mode == VerifyMode::Symbolic).then(|| ProductPlan::new(&fact.upsilon, &fact.upsilon1, f));
        let inner = InnerPlan::new(&fact.upsilon1, f);
        let (res, scale) = (0..points)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let x = opts.grid.point(n, i);
                let af = a.eval(&x)?;
                let uu = match &product {
                    Some(p) => p.eval(&x)?,
                    None => fd_outer(&fact.upsilon, &inner, &x, opts.fd_step)?,
                };
                let rhs = &uu + &q.eval(&x)?;
                Ok(((&af - &rhs).norm(), af.norm()))
            })
            .try_reduce(|| (0.0, 0.0), |p, q| Ok((p.0.max(q.0), p.1.max(q.1))))?;
        report.max_residual = report.max_residual.max(res);
        report.max_scale = report.max_scale.max(scale);
        report.per_test.push(res);
        report.modes.push(mode);
    }
    Ok(report)
}

/// Gaussian `exp(-(Σ z_j²)/2)` in `n` variables.
pub fn gaussian(n: usize) -> Expr {
    let mut s = Expr::num(0.0);
    for j in 0..n {
        s = Expr::add(s, Expr::pow(Expr::var(j), 2));
    }
    Expr::call(Func::Exp, Expr::mul(Expr::num(-0.5), s))
}

/// Seeded random polynomial of total degree `deg` with all monomials present
/// and coefficients uniform in `[-1, 1]`.
pub fn random_polynomial(n: usize, deg: u32, rng: &mut impl rand::Rng) -> Expr {
    let mut out = Expr::num(0.0);
    let mut monomial = vec![0u32; n];
    loop {
        if monomial.iter().sum::<u32>() <= deg {
            let mut m = Expr::num(rng.gen_range(-1.0..=1.0));
            for (j, &k) in monomial.iter().enumerate() {
                if k > 0 {
                    m = Expr::mul(m, Expr::pow(Expr::var(j), k));
                }
            }
            out = Expr::add(out, m);
        }
        let mut j = 0;
        loop {
            if j == n {
                return out;
            }
            monomial[j] += 1;
            if monomial[j] <= deg {
                break;
            }
            monomial[j] = 0;
            j += 1;
        }
    }
}
