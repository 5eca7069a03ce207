use serde::Serialize;

use super::operator::{multi_order, substitute_zero, DerivCache, DiffOp, OperatorSpec};
use super::verify::ProductPlan;
use super::{CoeffTerm, Factorization, HyperOp, HyperTerm, RemainderTerm};
use crate::algebra::{real_scalar_product, Ccd, CdNumber, DEFAULT_MAX_LEVEL};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadform::reduce_to_squares;

#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    pub max_level: u32,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { max_level: DEFAULT_MAX_LEVEL }
    }
}

/// Smallest `v` with `2^{v-1} < 2^p (m+1) ≤ 2^v`, raised to at least `r`.
pub fn choose_level(r: u32, p: u32, m: u32) -> u32 {
    let target = (1u64 << p) * (m as u64 + 1);
    let mut v = 0;
    while (1u64 << v) < target {
        v += 1;
    }
    v.max(r)
}

fn binom(n: i64, k: u64) -> u128 {
    if k == 0 {
        return 1;
    }
    if n < k as i64 {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k as i64 {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Smallest `v > r` with `2^{v-r} - 1 ≥ Σ_p Σ_{q=0}^{u} C(m_p+q-1, q)`.
pub fn choose_level_binomial(r: u32, block_sizes: &[usize], u: u32) -> u32 {
    let need: u128 =
        block_sizes.iter().map(|&m| (0..=u as u64).map(|q| binom(m as i64 + q as i64 - 1, q)).sum::<u128>()).sum();
    let mut v = r + 1;
    while (1u128 << (v - r)) - 1 < need {
        v += 1;
    }
    v
}

/// Square root `w` of a unit `c` along the normalized imaginary direction of `c`.
pub fn polar_sqrt(c: &CdNumber) -> Result<CdNumber> {
    let norm = c.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("polar square root needs |c| = 1, got {norm}")));
    }
    let im = c.im();
    let t = im.norm();
    if t <= 1e-15 {
        if c.re() > 0.0 {
            return Ok(CdNumber::one(c.level()));
        }
        return Ok(CdNumber::basis(c.level().max(1), 1));
    }
    let gamma = t.atan2(c.re());
    let mut w = im.scale((gamma / 2.0).sin() / t);
    w[0] = (gamma / 2.0).cos();
    Ok(w)
}

/// `|(b(w l))(w* l) + w² b|` with `l = i_index`.
pub fn slot_identity_residual(w: &CdNumber, index: usize, level: u32, b: &CdNumber) -> f64 {
    let l = CdNumber::basis(level, index);
    let lhs = b.mul(&w.mul(&l)).mul(&w.conj().mul(&l));
    let rhs = -&w.mul(w).mul(b);
    lhs.max_abs_diff(&rhs)
}

fn cd_level(c: &CdNumber) -> u32 {
    match c.coeffs().iter().rposition(|&x| x != 0.0) {
        None | Some(0) => 0,
        Some(h) => usize::BITS - h.leading_zeros(),
    }
}

fn ceil_log2(n: usize) -> u32 {
    let mut v = 0;
    while (1usize << v) < n {
        v += 1;
    }
    v
}

/// One squared first-order direction `c · b · (Σ weight ∂^α)²` with `a² = b`.
#[derive(Debug, Clone)]
struct Direction {
    weights: Vec<(Vec<u32>, f64)>,
    a: Expr,
    c: CdNumber,
}

/// Slot generator and its unit pair for one direction.
#[derive(Debug, Clone, Serialize)]
pub struct Slot {
    pub index: usize,
    pub c: CdNumber,
    /// Square root of a non-real `c`; real coefficients use the central `𝐢` instead.
    pub w: Option<CdNumber>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sign {
    NonNegative,
    NonPositive,
    Zero,
    Mixed,
}

pub(crate) fn sample_points(n: usize) -> Vec<Vec<f64>> {
    let per_axis = (((20_000f64).powf(1.0 / n as f64)).floor() as usize).clamp(2, 9);
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|_| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    -1.0 + 2.0 * k as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Sign of a real coefficient on the verification box `[-1,1]^n`.
fn sample_sign(e: &Expr, n: usize) -> Result<Sign> {
    let pts = if e.is_constant() { vec![vec![0.0; n]] } else { sample_points(n) };
    let (mut pos, mut neg) = (false, false);
    for x in &pts {
        let v = e.eval_real(x)?;
        pos |= v > 1e-14;
        neg |= v < -1e-14;
    }
    Ok(match (pos, neg) {
        (true, true) => Sign::Mixed,
        (true, false) => Sign::NonNegative,
        (false, true) => Sign::NonPositive,
        (false, false) => Sign::Zero,
    })
}

fn signed_direction(b: &Expr, n: usize, alpha: Vec<u32>, what: &str) -> Result<Option<Direction>> {
    let (b, c) = match sample_sign(b, n)? {
        Sign::Mixed => {
            return Err(Error::Spec(format!(
                "coefficient {b} of {what} changes sign on [-1,1]^{n}; sign-changing coefficients are not factored"
            )))
        }
        Sign::NonNegative => (b.clone(), 1.0),
        Sign::NonPositive => (Expr::neg(b.clone()), -1.0),
        Sign::Zero => return Ok(None),
    };
    Ok(Some(Direction { weights: vec![(alpha, 1.0)], a: b.sqrt_root(), c: CdNumber::real(0, c) }))
}

/// `(s, t)` with `Υ₁` coefficient `a s` and `Υ` coefficient `a t`.
fn slot_units(index: usize, c: &CdNumber, v: u32) -> Result<(Ccd, Ccd, Option<CdNumber>)> {
    let l = CdNumber::basis(v, index);
    if c.is_real() {
        let bold_i = Ccd::unit_i(v);
        let positive = c.re() > 0.0;
        return Ok(match (index, positive) {
            (0, true) => (bold_i.clone(), -&bold_i, None),
            (0, false) => (Ccd::scalar(v, -1.0, 0.0), Ccd::scalar(v, 1.0, 0.0), None),
            (_, true) => (Ccd::new(CdNumber::zero(v), l.clone()), Ccd::new(CdNumber::zero(v), l), None),
            (_, false) => (Ccd::from_real(l.clone()), Ccd::from_real(l), None),
        });
    }
    let w = polar_sqrt(c)?.embed(v);
    let s = -&w.mul(&l);
    let t = w.conj().mul(&l);
    Ok((Ccd::from_real(s), Ccd::from_real(t), Some(w)))
}

/// Number of polar directions `p` of the block coefficients, in block order.
fn polar_count(cs: &[CdNumber]) -> u32 {
    let mut prev: Option<CdNumber> = None;
    let mut p = 0;
    for c in cs {
        let im = c.im();
        let t = im.norm();
        let dir = if t > 1e-15 {
            im.scale(1.0 / t)
        } else if c.re() < 0.0 {
            CdNumber::basis(1, 1)
        } else {
            continue;
        };
        if prev.as_ref().map_or(true, |q| q.max_abs_diff(&dir) > 1e-12) {
            p += 1;
        }
        prev = Some(dir);
    }
    p
}

fn push_coeff(terms: &mut Vec<HyperTerm>, alpha: &[u32], ct: CoeffTerm) {
    match terms.iter_mut().find(|t| t.alpha == alpha) {
        Some(t) => t.coeff.push(ct),
        None => terms.push(HyperTerm { alpha: alpha.to_vec(), coeff: vec![ct] }),
    }
}

fn sub_indices(alpha: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &k in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=k).map(move |g| {
                    let mut p = prefix.clone();
                    p.push(g);
                    p
                })
            })
            .collect();
    }
    out
}

fn binom_multi(alpha: &[u32], gamma: &[u32]) -> f64 {
    alpha.iter().zip(gamma).map(|(&a, &g)| binom(a as i64, g as u64) as f64).product()
}

pub(crate) fn diff_multi(e: &Expr, gamma: &[u32]) -> Expr {
    let mut e = e.clone();
    for (j, &k) in gamma.iter().enumerate() {
        for _ in 0..k {
            e = e.diff(j);
        }
    }
    e
}

/// Leibniz expansion of `Υ(Υ₁ ·)` as `(alpha, scalar, [u_inner, u_outer])`
/// triples; `with_principal` keeps the `γ = 0` terms.
fn expand_product(upsilon: &HyperOp, upsilon1: &HyperOp, with_principal: bool) -> Vec<RemainderTerm> {
    let mut out = Vec::new();
    for outer in &upsilon.terms {
        for sigma in &outer.coeff {
            for inner in &upsilon1.terms {
                for tau in &inner.coeff {
                    for gamma in sub_indices(&outer.alpha) {
                        if !with_principal && gamma.iter().all(|&g| g == 0) {
                            continue;
                        }
                        let d = diff_multi(&tau.scalar, &gamma);
                        if d.is_zero() {
                            continue;
                        }
                        let k = binom_multi(&outer.alpha, &gamma);
                        let scalar = Expr::mul(Expr::mul(Expr::num(k), sigma.scalar.clone()), d);
                        let deriv =
                            outer.alpha.iter().zip(&gamma).zip(&inner.alpha).map(|((a, g), b)| a - g + b).collect();
                        out.push(RemainderTerm { scalar, deriv, right: vec![tau.unit.clone(), sigma.unit.clone()] });
                    }
                }
            }
        }
    }
    out
}

fn build(dirs: Vec<Direction>, op: &DiffOp, order: u32, rule_level: u32, opts: FactorOptions) -> Result<Factorization> {
    let n = op.dimension;
    let r = dirs.iter().filter(|d| !d.c.is_real()).map(|d| cd_level(&d.c)).max().unwrap_or(0);
    let slot_level = if r == 0 { ceil_log2(dirs.len()) } else { r + ceil_log2(dirs.len() + 1) };
    let v = slot_level.max(rule_level);
    if v > opts.max_level {
        return Err(Error::Capacity { level: v, max: opts.max_level });
    }
    let mut up = Vec::new();
    let mut up1 = Vec::new();
    let mut slots = Vec::new();
    for (o, d) in dirs.iter().enumerate() {
        let index = if r == 0 { o } else { (1 << r) * (o + 1) };
        let (s, t, w) = slot_units(index, &d.c, v)?;
        slots.push(Slot { index, c: d.c.clone(), w });
        for (alpha, weight) in &d.weights {
            let scalar = if *weight == 1.0 { d.a.clone() } else { Expr::mul(Expr::num(*weight), d.a.clone()) };
            push_coeff(&mut up1, alpha, CoeffTerm { scalar: scalar.clone(), unit: s.clone() });
            push_coeff(&mut up, alpha, CoeffTerm { scalar, unit: t.clone() });
        }
    }
    let upsilon = HyperOp { dimension: n, level: v, terms: up, zero_order: Vec::new() };
    let upsilon1 = HyperOp { dimension: n, level: v, terms: up1, zero_order: Vec::new() };

    let mut remainder: Vec<RemainderTerm> = op
        .terms
        .iter()
        .filter(|t| multi_order(&t.alpha) < order)
        .map(|t| RemainderTerm {
            scalar: t.coeff.clone(),
            deriv: t.alpha.clone(),
            right: t.right.iter().map(|c| Ccd::from_real(c.clone())).collect(),
        })
        .collect();
    for mut t in expand_product(&upsilon, &upsilon1, false) {
        t.scalar = Expr::neg(t.scalar);
        remainder.push(t);
    }
    Ok(Factorization {
        dimension: n,
        base_level: r,
        level: v,
        upsilon,
        upsilon1,
        remainder,
        slots,
        operator: op.clone(),
    })
}

fn rule_level(dirs: &[Direction]) -> u32 {
    let r = dirs.iter().filter(|d| !d.c.is_real()).map(|d| cd_level(&d.c)).max().unwrap_or(0);
    if r == 0 {
        return 0;
    }
    let mut distinct: Vec<CdNumber> = Vec::new();
    for d in dirs {
        if !distinct.iter().any(|c| c.max_abs_diff(&d.c) <= 1e-12) {
            distinct.push(d.c.clone());
        }
    }
    choose_level(r, polar_count(&distinct), distinct.len() as u32)
}

/// Factor a second-order operator as `A f = Υ(Υ₁ f) + Q f`.
pub fn factorize(spec: &OperatorSpec, opts: FactorOptions) -> Result<Factorization> {
    spec.validate()?;
    let n = spec.dimension;
    let op = spec.to_diffop();
    let a = &spec.second_order;
    let diagonal = (0..n).all(|l| (0..n).all(|m| l == m || a[l][m].is_zero()));
    let unit = |k: usize| -> Vec<u32> {
        let mut e = vec![0; n];
        e[k] = 1;
        e
    };
    let mut dirs = Vec::new();
    if diagonal {
        for k in 0..n {
            let b = &a[k][k];
            if b.is_zero() {
                continue;
            }
            if !b.is_real() {
                return Err(Error::Spec(format!("second-order coefficient {b} must be real")));
            }
            if let Some(j) = spec.block_of(k) {
                if sample_sign(b, n)? != Sign::NonNegative && sample_sign(b, n)? != Sign::Zero {
                    return Err(Error::Spec(format!(
                        "coefficient b_{k} = {b} is negative somewhere on [-1,1]^{n}; absorb the sign into the block coefficient"
                    )));
                }
                dirs.push(Direction { weights: vec![(unit(k), 1.0)], a: b.sqrt_root(), c: spec.blocks[j].c.clone() });
            } else if let Some(d) = signed_direction(b, n, unit(k), &format!("d{k}^2"))? {
                dirs.push(d);
            }
        }
    } else {
        if !spec.blocks.is_empty() {
            return Err(Error::Spec("explicit blocks require a diagonal second-order matrix".into()));
        }
        let mut m = vec![vec![0.0; n]; n];
        for l in 0..n {
            for k in 0..n {
                m[l][k] = a[l][k].as_const().ok_or_else(|| {
                    Error::Spec(format!(
                        "non-diagonal second-order part must be constant; entry ({l},{k}) is {}",
                        a[l][k]
                    ))
                })?;
            }
        }
        let red = reduce_to_squares(&m)?;
        for (d, &b) in red.b.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let weights = (0..n).filter(|&l| red.c[l][d].abs() > 1e-15).map(|l| (unit(l), red.c[l][d])).collect();
            dirs.push(Direction { weights, a: Expr::num(b.abs().sqrt()), c: CdNumber::real(0, b.signum()) });
        }
    }
    let level = rule_level(&dirs);
    build(dirs, &op, 2, level, opts)
}

/// Factor an operator of even order `2s` whose principal part is
/// `Σ_{|α|=s} c_α b_α(x) ∂^{2α}`, giving `Υ^s`, `Υ^s_1` of order `s`.
pub fn factorize_general(op: &DiffOp, opts: FactorOptions) -> Result<Factorization> {
    let n = op.dimension;
    let u = op.order();
    if u == 0 || u % 2 == 1 {
        return Err(Error::Spec(format!("order {u} is not a positive even number; lift odd orders first")));
    }
    let mut dirs: Vec<Direction> = Vec::new();
    for t in op.terms.iter().filter(|t| multi_order(&t.alpha) == u) {
        if t.alpha.iter().any(|k| k % 2 == 1) {
            return Err(Error::Spec(format!(
                "principal term with multi-index {:?} is not of the form d^(2a)",
                t.alpha
            )));
        }
        if !t.coeff.is_real() {
            return Err(Error::Spec(format!("principal coefficient {} must be real", t.coeff)));
        }
        let half: Vec<u32> = t.alpha.iter().map(|k| k / 2).collect();
        if dirs.iter().any(|d| d.weights[0].0 == half) {
            return Err(Error::Spec(format!("repeated principal multi-index {:?}", t.alpha)));
        }
        let what = format!("multi-index {:?}", t.alpha);
        match &t.right {
            Some(c) if !c.is_real() => {
                if (c.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::Spec(format!("block coefficient {c} is not of unit norm")));
                }
                if matches!(sample_sign(&t.coeff, n)?, Sign::Mixed | Sign::NonPositive) {
                    return Err(Error::Spec(format!("coefficient {} of {what} must be non-negative", t.coeff)));
                }
                dirs.push(Direction { weights: vec![(half, 1.0)], a: t.coeff.sqrt_root(), c: c.clone() });
            }
            right => {
                let b = match right {
                    Some(c) => Expr::mul(t.coeff.clone(), Expr::num(c.re())),
                    None => t.coeff.clone(),
                };
                if let Some(d) = signed_direction(&b, n, half, &what)? {
                    dirs.push(d);
                }
            }
        }
    }
    let r = dirs.iter().filter(|d| !d.c.is_real()).map(|d| cd_level(&d.c)).max().unwrap_or(0);
    let level = if r == 0 {
        0
    } else {
        let mut sizes: Vec<(CdNumber, Vec<bool>)> = Vec::new();
        for d in &dirs {
            let pos = match sizes.iter().position(|(c, _)| c.max_abs_diff(&d.c) <= 1e-12) {
                Some(p) => p,
                None => {
                    sizes.push((d.c.clone(), vec![false; n]));
                    sizes.len() - 1
                }
            };
            for (j, &k) in d.weights[0].0.iter().enumerate() {
                sizes[pos].1[j] |= k > 0;
            }
        }
        let counts: Vec<usize> = sizes.iter().map(|(_, used)| used.iter().filter(|&&b| b).count()).collect();
        choose_level_binomial(r, &counts, u / 2).max(rule_level(&dirs))
    };
    build(dirs, op, u, level, opts)
}

/// `(Υ + β)(Υ + β)^*` for constant real-algebra coefficients `t_j` of `Υ`.
pub fn compose_elliptic(upsilon: &HyperOp, beta: &CdNumber) -> Result<OperatorSpec> {
    let (t, beta0) = upsilon.constant_first_order().ok_or_else(|| {
        Error::Spec("closed-form composition needs constant first-order coefficients without bold i".into())
    })?;
    let beta = &beta0 + beta;
    let n = upsilon.dimension;
    let second_order = (0..n).map(|j| (0..n).map(|k| Expr::num(real_scalar_product(&t[j], &t[k]))).collect()).collect();
    let first_order = (0..n).map(|j| Expr::num(2.0 * real_scalar_product(&t[j], &beta))).collect();
    Ok(OperatorSpec {
        dimension: n,
        second_order,
        first_order,
        zero_order: Expr::num(beta.norm_sqr()),
        blocks: Vec::new(),
    })
}

/// Outcome of factoring the lift `E = ∂_t(t A ·)` of a first-order `A`.
#[derive(Debug, Clone, Serialize)]
pub struct LiftCheck {
    pub lifted_order: u32,
    /// Order of `(E - Υ Υ₁)|_{t=0}` from its collected coefficients.
    pub remainder_order_at_t0: u32,
    /// Largest `|(E f - Υ(Υ₁ f))(0,x) - R f(0,x)|` over the tests, where `R`
    /// keeps only the collected terms of order at most `2s-2`.
    pub residual: f64,
}

/// Factor the lift of a first-order operator with `Υ = ∂_t` and
/// `Υ₁ = t A_0`, and measure the order of the remainder at `t = 0`.
pub fn lift_corollary_check(op: &DiffOp, tests: &[Expr]) -> Result<LiftCheck> {
    if op.order() != 1 {
        return Err(Error::Spec(format!(
            "lifted factorization is implemented for first-order operators; got order {}",
            op.order()
        )));
    }
    let e = op.lift_odd_order();
    let n = e.dimension;
    let mut dt = vec![0; n];
    dt[0] = 1;
    let upsilon = HyperOp {
        dimension: n,
        level: 0,
        terms: vec![HyperTerm {
            alpha: dt,
            coeff: vec![CoeffTerm { scalar: Expr::num(1.0), unit: Ccd::scalar(0, 1.0, 0.0) }],
        }],
        zero_order: Vec::new(),
    };
    let mut terms = Vec::new();
    for t in op.terms.iter().filter(|t| multi_order(&t.alpha) == 1) {
        let mut alpha = vec![0];
        alpha.extend_from_slice(&t.alpha);
        let unit = t.right.clone().map_or(Ccd::scalar(0, 1.0, 0.0), Ccd::from_real);
        let scalar = Expr::mul(Expr::var(0), super::operator::shift_vars(&t.coeff, 1));
        push_coeff(&mut terms, &alpha, CoeffTerm { scalar, unit });
    }
    let upsilon1 = HyperOp { dimension: n, level: 0, terms, zero_order: Vec::new() };

    // E - ΥΥ₁ collected per derivative at t = 0, valid on real-valued tests.
    let mut collected: Vec<(Vec<u32>, Vec<(Expr, Ccd)>)> = Vec::new();
    let mut add = |deriv: &[u32], scalar: Expr, unit: Ccd| {
        let scalar = substitute_zero(&scalar, 0);
        if scalar.is_zero() {
            return;
        }
        match collected.iter_mut().find(|(d, _)| d == deriv) {
            Some((_, v)) => v.push((scalar, unit)),
            None => collected.push((deriv.to_vec(), vec![(scalar, unit)])),
        }
    };
    for t in &e.terms {
        let unit = t.right.clone().map_or(Ccd::scalar(0, 1.0, 0.0), Ccd::from_real);
        add(&t.alpha, t.coeff.clone(), unit);
    }
    for t in expand_product(&upsilon, &upsilon1, true) {
        let unit = t.right.iter().fold(Ccd::scalar(0, 1.0, 0.0), |acc, u| acc.mul(u));
        add(&t.deriv, Expr::neg(t.scalar), unit);
    }
    let samples: Vec<Vec<f64>> = sample_points(n - 1).into_iter().map(|x| [vec![0.0], x].concat()).collect();
    let mut order = 0;
    let mut low: Vec<(Vec<u32>, Vec<(Expr, Ccd)>)> = Vec::new();
    for (deriv, parts) in &collected {
        let mut nonzero = false;
        for x in &samples {
            let mut acc = Ccd::zero(0);
            for (s, u) in parts {
                acc += &u.scale(s.eval_real(x)?);
            }
            nonzero |= acc.norm() > 1e-12;
        }
        if nonzero {
            order = order.max(multi_order(deriv));
        }
        // 2s - 2 = 0 for a first-order A.
        if multi_order(deriv) == 0 {
            low.push((deriv.clone(), parts.clone()));
        }
    }

    let mut residual: f64 = 0.0;
    for f in tests {
        let mut cache = DerivCache::new(f.clone());
        let plan = ProductPlan::new(&upsilon, &upsilon1, f);
        for x in &samples {
            let ef = Ccd::from_real(e.apply(&mut cache, x)?);
            let g = plan.eval(x)?;
            let mut rf = Ccd::zero(0);
            for (deriv, parts) in &low {
                let d = cache.get(deriv).eval_real(x)?;
                for (s, u) in parts {
                    rf += &u.scale(d * s.eval_real(x)?);
                }
            }
            residual = residual.max((&(&ef - &g) - &rf).norm());
        }
    }
    Ok(LiftCheck { lifted_order: e.order(), remainder_order_at_t0: order, residual })
}
