use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::algebra::CdNumber;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};

/// Group of variables sharing the unit coefficient `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub c: CdNumber,
    pub vars: Vec<usize>,
}

/// Second-order operator
/// `A f = Σ_{l,m} a_{lm} ∂_l∂_m f + Σ_l α_l ∂_l f + β f`.
///
/// With explicit blocks the diagonal holds `b_k ≥ 0` and the principal part is
/// `Σ_j c_j Σ_{k∈block j} b_k ∂_k²`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub dimension: usize,
    pub second_order: Vec<Vec<Expr>>,
    pub first_order: Vec<Expr>,
    pub zero_order: Expr,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawBlock {
    c: String,
    vars: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSpec {
    dimension: usize,
    second_order: Vec<Vec<String>>,
    #[serde(default)]
    first_order: Vec<String>,
    #[serde(default)]
    zero_order: Option<String>,
    #[serde(default)]
    blocks: Vec<RawBlock>,
}

/// Parse a hypercomplex constant such as `"1"`, `"-1"` or `"0.6+0.8*i2"`.
pub fn parse_cd_literal(text: &str) -> Result<CdNumber> {
    let e = parse(text, 0)?;
    e.eval(&[])
}

impl OperatorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)
            .map_err(|e| Error::Parse { offset: e.column(), message: format!("line {}: {e}", e.line()) })?;
        let n = raw.dimension;
        let ex = |s: &str| parse(s, n);
        if raw.second_order.len() != n || raw.second_order.iter().any(|r| r.len() != n) {
            return Err(Error::Spec(format!("second_order must be {n}x{n}")));
        }
        let second_order = raw
            .second_order
            .iter()
            .map(|row| row.iter().map(|s| ex(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let first_order = if raw.first_order.is_empty() {
            vec![Expr::num(0.0); n]
        } else if raw.first_order.len() == n {
            raw.first_order.iter().map(|s| ex(s)).collect::<Result<Vec<_>>>()?
        } else {
            return Err(Error::Spec(format!("first_order must have {n} entries")));
        };
        let zero_order = match &raw.zero_order {
            Some(s) => ex(s)?,
            None => Expr::num(0.0),
        };
        let blocks = raw
            .blocks
            .iter()
            .map(|b| Ok(Block { c: parse_cd_literal(&b.c)?, vars: b.vars.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let spec = OperatorSpec { dimension: n, second_order, first_order, zero_order, blocks };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = RawSpec {
            dimension: self.dimension,
            second_order: self.second_order.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect(),
            first_order: self.first_order.iter().map(|e| e.to_string()).collect(),
            zero_order: Some(self.zero_order.to_string()),
            blocks: self.blocks.iter().map(|b| RawBlock { c: b.c.to_string(), vars: b.vars.clone() }).collect(),
        };
        serde_json::to_value(raw).expect("serializable")
    }

    /// Constant-coefficient operator from a real matrix.
    pub fn constant(matrix: &[Vec<f64>]) -> Self {
        let n = matrix.len();
        OperatorSpec {
            dimension: n,
            second_order: matrix.iter().map(|r| r.iter().map(|&x| Expr::num(x)).collect()).collect(),
            first_order: vec![Expr::num(0.0); n],
            zero_order: Expr::num(0.0),
            blocks: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 || n > crate::expr::MAX_COORD + 1 {
            return Err(Error::Spec(format!("dimension {n} out of range")));
        }
        if self.blocks.is_empty() {
            return Ok(());
        }
        let mut seen = vec![false; n];
        for b in &self.blocks {
            if (b.c.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Spec(format!("block coefficient {} is not of unit norm", b.c)));
            }
            for &k in &b.vars {
                if k >= n || seen[k] {
                    return Err(Error::Spec(format!("block variables must partition 0..{n}; bad index {k}")));
                }
                seen[k] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Spec(format!("block variables must partition 0..{n}")));
        }
        Ok(())
    }

    pub fn block_of(&self, k: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.vars.contains(&k))
    }

    /// The operator as a sum of `(∂^α f · coeff) · right` terms.
    pub fn to_diffop(&self) -> DiffOp {
        let n = self.dimension;
        let mut terms = Vec::new();
        for l in 0..n {
            for m in l..n {
                let coeff = if l == m {
                    self.second_order[l][l].clone()
                } else {
                    Expr::add(self.second_order[l][m].clone(), self.second_order[m][l].clone())
                };
                if coeff.is_zero() {
                    continue;
                }
                let mut alpha = vec![0u32; n];
                alpha[l] += 1;
                alpha[m] += 1;
                let right = if l == m { self.block_of(l).map(|j| self.blocks[j].c.clone()) } else { None };
                terms.push(DiffTerm { alpha, coeff, right });
            }
        }
        for (l, a) in self.first_order.iter().enumerate() {
            if !a.is_zero() {
                let mut alpha = vec![0u32; n];
                alpha[l] = 1;
                terms.push(DiffTerm { alpha, coeff: a.clone(), right: None });
            }
        }
        if !self.zero_order.is_zero() {
            terms.push(DiffTerm { alpha: vec![0; n], coeff: self.zero_order.clone(), right: None });
        }
        DiffOp { dimension: n, terms }
    }
}

/// One term `(∂^α f · coeff(x)) · right` of a linear differential operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffTerm {
    pub alpha: Vec<u32>,
    pub coeff: Expr,
    pub right: Option<CdNumber>,
}

/// Linear differential operator of arbitrary order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp {
    pub dimension: usize,
    pub terms: Vec<DiffTerm>,
}

pub fn multi_order(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

impl DiffOp {
    pub fn order(&self) -> u32 {
        self.terms.iter().filter(|t| !t.coeff.is_zero()).map(|t| multi_order(&t.alpha)).max().unwrap_or(0)
    }

    pub fn apply(&self, cache: &mut DerivCache, x: &[f64]) -> Result<CdNumber> {
        let mut acc = CdNumber::zero(0);
        for t in &self.terms {
            let d = cache.get(&t.alpha).eval(x)?;
            let mut v = d.mul(&t.coeff.eval(x)?);
            if let Some(r) = &t.right {
                v = v.mul(r);
            }
            acc += &v;
        }
        Ok(acc)
    }

    /// `E g(t, x) = ∂_t (t · A g(t, x))` in the variables `(t, x_0, x_1, ...)`,
    /// with `t` taking coordinate index 0.
    pub fn lift_odd_order(&self) -> DiffOp {
        let shift = |e: &Expr| shift_vars(e, 1);
        let mut terms = Vec::new();
        for t in &self.terms {
            let mut alpha = vec![0u32];
            alpha.extend_from_slice(&t.alpha);
            terms.push(DiffTerm { alpha: alpha.clone(), coeff: shift(&t.coeff), right: t.right.clone() });
            alpha[0] += 1;
            terms.push(DiffTerm { alpha, coeff: Expr::mul(Expr::var(0), shift(&t.coeff)), right: t.right.clone() });
        }
        DiffOp { dimension: self.dimension + 1, terms }
    }

    /// Restriction to `t = 0` of an operator in `(t, x)`: coefficients are
    /// evaluated at `t = 0` and vanishing terms dropped.
    pub fn at_t_zero(&self) -> DiffOp {
        let terms = self
            .terms
            .iter()
            .map(|t| DiffTerm { alpha: t.alpha.clone(), coeff: substitute_zero(&t.coeff, 0), right: t.right.clone() })
            .filter(|t| !t.coeff.is_zero())
            .collect();
        DiffOp { dimension: self.dimension, terms }
    }
}

/// Rename `z_j` to `z_{j+by}`.
pub fn shift_vars(e: &Expr, by: usize) -> Expr {
    match e {
        Expr::Var(j) => Expr::Var(j + by),
        Expr::Num(_) | Expr::Unit(_) => e.clone(),
        Expr::Add(a, b) => Expr::Add(Box::new(shift_vars(a, by)), Box::new(shift_vars(b, by))),
        Expr::Sub(a, b) => Expr::Sub(Box::new(shift_vars(a, by)), Box::new(shift_vars(b, by))),
        Expr::Mul(a, b) => Expr::Mul(Box::new(shift_vars(a, by)), Box::new(shift_vars(b, by))),
        Expr::Div(a, b) => Expr::Div(Box::new(shift_vars(a, by)), Box::new(shift_vars(b, by))),
        Expr::Pow(a, n) => Expr::Pow(Box::new(shift_vars(a, by)), *n),
        Expr::Neg(a) => Expr::Neg(Box::new(shift_vars(a, by))),
        Expr::Call(f, a) => Expr::Call(*f, Box::new(shift_vars(a, by))),
    }
}

/// Substitute `z_j = 0` and fold constants.
pub fn substitute_zero(e: &Expr, j: usize) -> Expr {
    match e {
        Expr::Var(k) if *k == j => Expr::num(0.0),
        Expr::Num(_) | Expr::Unit(_) | Expr::Var(_) => e.clone(),
        Expr::Add(a, b) => Expr::add(substitute_zero(a, j), substitute_zero(b, j)),
        Expr::Sub(a, b) => Expr::sub(substitute_zero(a, j), substitute_zero(b, j)),
        Expr::Mul(a, b) => Expr::mul(substitute_zero(a, j), substitute_zero(b, j)),
        Expr::Div(a, b) => Expr::div(substitute_zero(a, j), substitute_zero(b, j)),
        Expr::Pow(a, n) => Expr::pow(substitute_zero(a, j), *n),
        Expr::Neg(a) => Expr::neg(substitute_zero(a, j)),
        Expr::Call(f, a) => Expr::call(*f, substitute_zero(a, j)),
    }
}

/// Memoized symbolic derivatives `∂^α f` of one expression.
#[derive(Debug, Clone)]
pub struct DerivCache {
    base: Expr,
    map: HashMap<Vec<u32>, Expr>,
}

impl DerivCache {
    pub fn new(f: Expr) -> Self {
        DerivCache { base: f, map: HashMap::new() }
    }

    pub fn base(&self) -> &Expr {
        &self.base
    }

    pub fn get(&mut self, alpha: &[u32]) -> &Expr {
        if !self.map.contains_key(alpha) {
            let mut e = self.base.clone();
            for (j, &k) in alpha.iter().enumerate() {
                for _ in 0..k {
                    e = e.diff(j);
                }
            }
            self.map.insert(alpha.to_vec(), e);
        }
        &self.map[alpha]
    }
}
