use rayon::prelude::*;
use serde::Serialize;

use super::{Path, Phrase};
use crate::algebra::{Ccd, CdNumber};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::factorize::{CoeffTerm, HyperOp, HyperTerm};
use crate::fundamental::GridField;

/// Sampled integrand `z ↦ f(z)`.
pub type Integrand<'a> = &'a (dyn Fn(&CdNumber) -> Result<CdNumber> + Sync);

#[derive(Debug, Clone, Copy)]
pub struct LineOptions {
    pub rtol: f64,
    pub max_refinements: usize,
    /// Refinements always performed before the stopping test.
    pub min_refinements: usize,
}

impl Default for LineOptions {
    fn default() -> Self {
        LineOptions { rtol: 1e-9, max_refinements: 22, min_refinements: 3 }
    }
}

/// Columns of the extrapolation table kept per row.
const ROMBERG_DEPTH: usize = 8;

/// Cell width of the separable `ν` tables.
const TABLE_STEP: f64 = 2e-3;

/// `ν_j(s) = ∫_lo^s dt/ψ_j(t)` at equally spaced nodes, with `1/ψ_j` for
/// cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct NuTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl NuTable {
    pub fn build(psi: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Spec(format!("empty table range [{lo}, {hi}]")));
        }
        let cells = ((hi - lo) / TABLE_STEP).ceil().max(1.0) as usize;
        let step = (hi - lo) / cells as f64;
        // 5-point Gauss-Legendre on every cell
        const X: [f64; 5] =
            [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let inv = |t: f64| -> Result<f64> {
            let p = psi(t)?;
            if p.abs() < 1e-14 || !p.is_finite() {
                return Err(Error::Singular(format!("psi vanishes at {t}")));
            }
            Ok(1.0 / p)
        };
        let mut values = vec![0.0];
        let mut slopes = vec![inv(lo)?];
        let sign = slopes[0].signum();
        for c in 0..cells {
            let a = lo + c as f64 * step;
            let mid = a + 0.5 * step;
            let mut s = 0.0;
            for (x, w) in X.iter().zip(W) {
                let v = inv(mid + 0.5 * step * x)?;
                if v.signum() != sign {
                    return Err(Error::Singular(format!("psi changes sign near {}", mid + 0.5 * step * x)));
                }
                s += w * v;
            }
            values.push(values[c] + 0.5 * step * s);
            slopes.push(inv(a + step)?);
        }
        Ok(NuTable { lo, step, values, slopes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.values.len() - 1) as f64)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if t < lo - tol || t > hi + tol {
            return Err(Error::Domain(format!("{t} outside the nu table range [{lo}, {hi}]")));
        }
        let u = ((t - lo) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let s = u - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1])
    }
}

#[derive(Debug, Clone)]
pub enum NuKind {
    /// `ν(z) = z_j / ψ`.
    Constant(f64),
    Separable(NuTable),
}

/// Real-valued `ν_j` depending on the coordinate `z_j` only.
#[derive(Debug, Clone)]
pub struct Nu {
    pub coord: usize,
    pub kind: NuKind,
}

impl Nu {
    pub fn eval(&self, z: &CdNumber) -> Result<f64> {
        let t = z.coeffs().get(self.coord).copied().unwrap_or(0.0);
        match &self.kind {
            NuKind::Constant(psi) => Ok(t / psi),
            NuKind::Separable(table) => table.eval(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NuSystem {
    pub nus: Vec<Nu>,
}

/// `Υ g = Σ_j (∂g/∂z_j) i_j^* ψ_j(z)` over the listed coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiOperator {
    pub level: u32,
    pub slots: Vec<(usize, Expr)>,
}

impl PsiOperator {
    pub fn new(level: u32, slots: Vec<(usize, Expr)>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Spec("the operator needs at least one slot".into()));
        }
        let dim = 1usize << level;
        for (k, (j, psi)) in slots.iter().enumerate() {
            if *j >= dim {
                return Err(Error::Spec(format!("slot coordinate {j} beyond level {level}")));
            }
            if slots[..k].iter().any(|(i, _)| i == j) {
                return Err(Error::Spec(format!("slot coordinate {j} repeated")));
            }
            if psi.max_var().is_some_and(|m| m >= dim) || !psi.is_real() {
                return Err(Error::Spec(format!("psi_{j} = {psi} must be a real expression in z0..z{}", dim - 1)));
            }
        }
        Ok(PsiOperator { level, slots })
    }

    pub fn constant(level: u32, slots: &[(usize, f64)]) -> Result<Self> {
        Self::new(level, slots.iter().map(|&(j, p)| (j, Expr::num(p))).collect())
    }

    pub fn n(&self) -> usize {
        self.slots.len()
    }

    /// Recognise `φ_j = i_j^* ψ_j` in a first-order operator.
    pub fn from_first_order(op: &HyperOp) -> Result<Self> {
        let unsupported = || Error::Spec("only coefficients i_j^* psi_j(z) with real psi_j are supported".into());
        if !op.zero_order.is_empty() || op.order() != 1 {
            return Err(unsupported());
        }
        let mut slots: Vec<(usize, Expr)> = Vec::new();
        for t in &op.terms {
            let j = t.alpha.iter().position(|&a| a == 1).ok_or_else(unsupported)?;
            let target = CdNumber::basis(op.level, j).conj();
            let mut psi = Expr::num(0.0);
            for c in &t.coeff {
                if c.unit.im.norm() != 0.0 {
                    return Err(unsupported());
                }
                let s = crate::algebra::real_scalar_product(&c.unit.re, &target);
                if c.unit.re.max_abs_diff(&target.scale(s)) > 1e-14 {
                    return Err(unsupported());
                }
                psi = Expr::add(psi, Expr::mul(Expr::num(s), c.scalar.clone()));
            }
            match slots.iter_mut().find(|(i, _)| *i == j) {
                Some((_, p)) => *p = Expr::add(p.clone(), psi),
                None => slots.push((j, psi)),
            }
        }
        Self::new(op.level, slots)
    }

    pub fn to_first_order(&self) -> HyperOp {
        let dim = 1usize << self.level;
        let terms = self
            .slots
            .iter()
            .map(|(j, psi)| {
                let mut alpha = vec![0u32; dim];
                alpha[*j] = 1;
                let unit = Ccd::from_real(CdNumber::basis(self.level, *j).conj());
                HyperTerm { alpha, coeff: vec![CoeffTerm { scalar: psi.clone(), unit }] }
            })
            .collect();
        HyperOp { dimension: dim, level: self.level, terms, zero_order: Vec::new() }
    }

    /// `ν_j` with `∂ν_j/∂z_j = 1/ψ_j`; separable tables cover `[lo, hi]`.
    pub fn nu_system(&self, lo: f64, hi: f64) -> Result<NuSystem> {
        let dim = 1usize << self.level;
        let mut nus = Vec::new();
        for (j, psi) in &self.slots {
            let kind = if let Some(p) = psi.as_const() {
                if p == 0.0 {
                    return Err(Error::Singular(format!("psi_{j} is identically zero")));
                }
                NuKind::Constant(p)
            } else if (0..dim).all(|k| k == *j || !psi.depends_on(k)) {
                let f = |t: f64| -> Result<f64> {
                    let mut x = vec![0.0; dim];
                    x[*j] = t;
                    psi.eval_real(&x)
                };
                NuKind::Separable(NuTable::build(&f, lo, hi)?)
            } else {
                return Err(Error::Spec(format!(
                    "psi_{j} = {psi} depends on other coordinates; only constant and separable psi are supported"
                )));
            };
            nus.push(Nu { coord: *j, kind });
        }
        Ok(NuSystem { nus })
    }
}

/// Doubling refinement with Richardson extrapolation in the partition width;
/// stops when successive extrapolated estimates agree to `rtol·(1+|I|)`.
fn refine(mut sum: impl FnMut(usize) -> Result<CdNumber>, opts: &LineOptions) -> Result<CdNumber> {
    let mut last_row: Vec<CdNumber> = Vec::new();
    let mut prev: Option<CdNumber> = None;
    let mut gap = f64::INFINITY;
    for r in 0..=opts.max_refinements {
        let mut row = vec![sum(r)?];
        for j in 1..=r.min(ROMBERG_DEPTH) {
            let d = &row[j - 1] - &last_row[j - 1];
            let next = &row[j - 1] + &d.scale(1.0 / ((1u64 << j) - 1) as f64);
            row.push(next);
        }
        let best = row.last().expect("non-empty").clone();
        if let Some(p) = &prev {
            gap = (&best - p).norm();
            if r >= opts.min_refinements && gap <= opts.rtol * (1.0 + best.norm()) {
                return Ok(best);
            }
        }
        prev = Some(best);
        last_row = row;
    }
    let last = prev.map(|p| p.to_string()).unwrap_or_default();
    let previous = last_row.first().map(|p| p.to_string()).unwrap_or_default();
    Err(Error::Convergence { refinements: opts.max_refinements, gap, previous, last })
}

fn lerp(a: &CdNumber, b: &CdNumber, t: f64) -> CdNumber {
    &a.scale(1.0 - t) + &b.scale(t)
}

/// Left Riemann–Stieltjes sum of `μ` against `ν` (identity when `None`) with
/// `2^r` equal pieces per segment.
pub fn riemann_sum(mu: &Phrase, gamma: &Path, nu: Option<&Nu>, r: usize) -> Result<CdNumber> {
    match nu {
        None => Ok(identity_sum(&mu.left_antiderivative(), gamma, r)),
        Some(nu) => nu_sum(&|z: &CdNumber| Ok(mu.eval(z)), gamma, nu, r),
    }
}

/// `Σ (dκ/dz)|_{γ(τ_i)}.[γ(τ_{i+1}) − γ(τ_i)]`.
fn identity_sum(kappa: &Phrase, gamma: &Path, r: usize) -> CdNumber {
    let pieces = 1usize << r;
    let level = gamma.level().max(kappa.level());
    let mut acc = CdNumber::zero(level);
    for (a, b) in gamma.segments() {
        let dz = (b - a).scale(1.0 / pieces as f64);
        let mut seg = CdNumber::zero(level);
        for i in 0..pieces {
            let z = lerp(a, b, i as f64 / pieces as f64);
            seg += &kappa.derivative_apply(&z, &dz);
        }
        acc += &seg;
    }
    acc
}

/// `Σ f(γ(τ_i)) · (ν(γ(τ_{i+1})) − ν(γ(τ_i)))`; for real increments
/// `(dκ/dz).Δν = Δν · μ`.
fn nu_sum(f: Integrand<'_>, gamma: &Path, nu: &Nu, r: usize) -> Result<CdNumber> {
    let pieces = 1usize << r;
    let mut acc = CdNumber::zero(gamma.level());
    for (a, b) in gamma.segments() {
        let (ta, tb) = (a.coeffs().get(nu.coord).copied(), b.coeffs().get(nu.coord).copied());
        if ta == tb {
            continue;
        }
        let mut seg = CdNumber::zero(gamma.level());
        let mut z = a.clone();
        let mut v = nu.eval(&z)?;
        for i in 0..pieces {
            let next = lerp(a, b, (i + 1) as f64 / pieces as f64);
            let w = nu.eval(&next)?;
            seg += &f(&z)?.scale(w - v);
            z = next;
            v = w;
        }
        acc += &seg;
    }
    Ok(acc)
}

/// `∫_γ μ dν`, with `ν` the identity when `None`.
pub fn line_integrate(mu: &Phrase, gamma: &Path, nu: Option<&Nu>, opts: &LineOptions) -> Result<CdNumber> {
    match nu {
        None => {
            let kappa = mu.left_antiderivative();
            refine(|r| Ok(identity_sum(&kappa, gamma, r)), opts)
        }
        Some(nu) => line_integrate_fn(&|z: &CdNumber| Ok(mu.eval(z)), gamma, nu, opts),
    }
}

/// `∫_γ f dν` for a sampled integrand and real-valued `ν`.
pub fn line_integrate_fn(f: Integrand<'_>, gamma: &Path, nu: &Nu, opts: &LineOptions) -> Result<CdNumber> {
    refine(|r| nu_sum(f, gamma, nu, r), opts)
}

/// `n^{-1} Σ_j (∫_γ f dν_j) i_j` along `γ` from the base point to the target.
pub fn antiderivative_with(f: Integrand<'_>, nus: &NuSystem, gamma: &Path, opts: &LineOptions) -> Result<CdNumber> {
    let n = nus.nus.len() as f64;
    let mut acc = CdNumber::zero(gamma.level());
    for nu in &nus.nus {
        let g = line_integrate_fn(f, gamma, nu, opts)?;
        acc += &g.mul(&CdNumber::basis(gamma.level(), nu.coord));
    }
    Ok(acc.scale(1.0 / n))
}

fn coord_range(points: &[&CdNumber], j: usize) -> (f64, f64) {
    let vals: Vec<f64> = points.iter().map(|p| p.coeffs().get(j).copied().unwrap_or(0.0)).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 1e-3 * (1.0 + hi - lo);
    (lo - pad, hi + pad)
}

fn joint_range(op: &PsiOperator, points: &[&CdNumber]) -> (f64, f64) {
    op.slots
        .iter()
        .map(|(j, _)| coord_range(points, *j))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// `I_Υ f` at the end of `gamma`, with `I_Υ f = 0` at its start.
pub fn antiderivative(f: Integrand<'_>, op: &PsiOperator, gamma: &Path, opts: &LineOptions) -> Result<CdNumber> {
    let points: Vec<&CdNumber> = gamma.vertices().iter().collect();
    let (lo, hi) = joint_range(op, &points);
    let nus = op.nu_system(lo, hi)?;
    antiderivative_with(f, &nus, gamma, opts)
}

/// How a target is joined to the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFamily {
    /// Axis-parallel moves: coordinates outside the slots first, then the
    /// slot coordinates in slot order.
    Staircase,
    Straight,
}

pub fn family_path(family: PathFamily, op: &PsiOperator, z0: &CdNumber, z: &CdNumber) -> Path {
    let level = z0.level().max(z.level()).max(op.level);
    let (z0, z) = (z0.embed(level), z.embed(level));
    match family {
        PathFamily::Straight => Path::segment(z0, z),
        PathFamily::Staircase => {
            let slot_coords: Vec<usize> = op.slots.iter().map(|(j, _)| *j).collect();
            let order = (0..z.dim()).filter(|k| !slot_coords.contains(k)).chain(slot_coords.iter().copied());
            let mut vertices = vec![z0.clone()];
            let mut cur = z0.clone();
            for k in order {
                if cur[k] != z[k] {
                    cur[k] = z[k];
                    vertices.push(cur.clone());
                }
            }
            if vertices.len() == 1 {
                vertices.push(cur);
            }
            Path::new(vertices).expect("at least two vertices")
        }
    }
}

/// Regular grid whose axis `k` is coordinate `z_k`; coordinates past the
/// grid dimension are taken from the base point.
#[derive(Debug, Clone)]
pub struct TargetGrid {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl TargetGrid {
    pub fn cube(n: usize, nodes: usize, lo: f64, hi: f64) -> Self {
        let h = (hi - lo) / (nodes.max(2) - 1) as f64;
        TargetGrid { shape: vec![nodes; n], origin: vec![lo; n], spacing: vec![h; n] }
    }

    fn target(&self, z0: &CdNumber, x: &[f64]) -> CdNumber {
        let mut z = z0.clone();
        for (k, &v) in x.iter().enumerate() {
            z[k] = v;
        }
        z
    }

    /// Field of `g(z)` over the grid.
    pub fn sample(&self, z0: &CdNumber, g: Integrand<'_>) -> Result<GridField> {
        GridField::from_fn(self.shape.clone(), self.origin.clone(), self.spacing.clone(), |x| g(&self.target(z0, x)))
    }
}

/// `I_Υ f` at every grid node; targets are independent and run in parallel.
pub fn antiderivative_field(
    f: Integrand<'_>,
    op: &PsiOperator,
    z0: &CdNumber,
    grid: &TargetGrid,
    family: PathFamily,
    opts: &LineOptions,
) -> Result<GridField> {
    let level = z0.level().max(op.level);
    let z0 = z0.embed(level);
    if grid.shape.len() > z0.dim() {
        return Err(Error::Spec(format!(
            "grid dimension {} exceeds the algebra dimension {}",
            grid.shape.len(),
            z0.dim()
        )));
    }
    let corners = [
        grid.target(&z0, &grid.origin),
        grid.target(
            &z0,
            &grid
                .origin
                .iter()
                .zip(&grid.spacing)
                .zip(&grid.shape)
                .map(|((o, h), &s)| o + h * (s - 1) as f64)
                .collect::<Vec<_>>(),
        ),
    ];
    let (lo, hi) = joint_range(op, &[&z0, &corners[0], &corners[1]]);
    let nus = op.nu_system(lo, hi)?;
    grid.sample(&z0, &|z: &CdNumber| antiderivative_with(f, &nus, &family_path(family, op, &z0, z), opts))
}

#[derive(Debug, Clone, Serialize)]
pub struct LeftInverseReport {
    /// `max |Υ F − f|` over interior nodes.
    pub max_residual: f64,
    pub max_f: f64,
    pub points: usize,
}

/// Check `Υ F = f` with 5-point central differences along the differentiated
/// axes; nodes within 2 of an edge of those axes are skipped.
pub fn verify_left_inverse(big_f: &GridField, f: &GridField, upsilon: &HyperOp) -> Result<LeftInverseReport> {
    big_f.check_aligned(f)?;
    let dim = big_f.dimension();
    let mut axes = Vec::new();
    for t in &upsilon.terms {
        let j = match t.alpha.iter().position(|&a| a > 0) {
            Some(j) if t.alpha.iter().sum::<u32>() == 1 => j,
            _ => return Err(Error::Spec("verify_left_inverse needs a first-order operator".into())),
        };
        if j >= dim {
            return Err(Error::Stencil(format!("derivative along z{j} but the grid has {dim} axes")));
        }
        if big_f.shape[j] < 5 {
            return Err(Error::Stencil(format!("axis {j} has {} nodes; the stencil needs 5", big_f.shape[j])));
        }
        if !axes.contains(&j) {
            axes.push(j);
        }
    }
    let interior: Vec<usize> = (0..big_f.len())
        .filter(|&i| {
            let idx = big_f.multi_index(i);
            axes.iter().all(|&j| idx[j] >= 2 && idx[j] + 2 < big_f.shape[j])
        })
        .collect();
    let level = big_f.level().max(f.level()).max(upsilon.level);
    let (res, fmax) = interior
        .par_iter()
        .map(|&i| -> Result<(f64, f64)> {
            let mut x = big_f.point(i);
            x.resize(x.len().max(upsilon.dimension), 0.0);
            let mut acc = Ccd::zero(level);
            for t in &upsilon.terms {
                let j = t.alpha.iter().position(|&a| a > 0).expect("checked");
                let s = big_f.stride(j);
                let v = |k: isize| &big_f.values[(i as isize + k * s as isize) as usize];
                let num = &(&(v(-2) - v(2)) + &v(1).scale(8.0)) - &v(-1).scale(8.0);
                let d = num.scale(1.0 / (12.0 * big_f.spacing[j]));
                acc += &d.mul(&crate::factorize::sum_terms(&t.coeff, &x, level)?);
            }
            let target = f.values[i].embed(level);
            Ok(((&acc - &target).norm(), f.values[i].norm()))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
    Ok(LeftInverseReport { max_residual: res, max_f: fmax, points: interior.len() })
}
