use rayon::prelude::*;
use serde::Serialize;

use super::grid::{GridField, GridSpec};
use super::solution::FundamentalSolution;
use crate::algebra::Ccd;
use crate::error::{Error, Result};
use crate::factorize::{sum_terms, HyperOp};

/// Node pairs up to which the plain double loop is used.
pub const DIRECT_PAIR_BUDGET: usize = 64 * 64 * 64;

/// Convolution kernel: closed form or sampled on a grid.
#[derive(Clone, Copy)]
pub enum Kernel<'a> {
    Solution(&'a FundamentalSolution),
    Grid(&'a GridField),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub pairs: usize,
    pub blocked: bool,
    /// Singular kernel cells replaced by their exact mean.
    pub averaged: usize,
    /// Singular kernel cells set to zero.
    pub zeroed: usize,
    /// Bound on what the zeroed cells dropped: `Σ |g| ∫_cell |E|`.
    pub zeroed_bound: f64,
}

#[derive(Debug, Clone)]
pub struct Convolved {
    pub field: GridField,
    pub report: ConvolutionReport,
}

/// Trapezoid weight of node `idx`, including the cell volume.
fn trapezoid_weight(g: &GridField, idx: &[usize]) -> f64 {
    let mut w = g.cell_volume();
    for (k, &i) in idx.iter().enumerate() {
        if g.shape[k] > 1 && (i == 0 || i + 1 == g.shape[k]) {
            w *= 0.5;
        }
    }
    w
}

/// `∫_cell |E|` over the cell centred at `d`, by a 4-per-axis midpoint rule.
fn cell_abs_integral(sol: &FundamentalSolution, d: &[f64], spacing: &[f64]) -> f64 {
    let n = d.len();
    let sub = 4usize;
    let count = sub.pow(n as u32);
    let vol: f64 = spacing.iter().product::<f64>() / count as f64;
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    for c in 0..count {
        let mut r = c;
        for k in 0..n {
            let i = r % sub;
            r /= sub;
            x[k] = d[k] + ((i as f64 + 0.5) / sub as f64 - 0.5) * spacing[k];
        }
        if let Ok((a, b)) = sol.eval_scalar(&x) {
            total += (a * a + b * b).sqrt() * vol;
        }
    }
    total
}

struct Source {
    point: Vec<f64>,
    idx: Vec<isize>,
    value: Ccd,
    scalar: (f64, f64),
    weight: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    averaged: usize,
    zeroed: usize,
    bound: f64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally { averaged: self.averaged + o.averaged, zeroed: self.zeroed + o.zeroed, bound: self.bound + o.bound }
    }
}

enum KVal {
    Value(Ccd),
    Scalar(f64, f64),
    Averaged(Ccd),
    Zero(f64),
    Outside,
}

/// `(E*g)(x) = Σ_y w_y E(x−y) g(y)` on `g`'s own grid.
pub fn convolve_solve(e: Kernel<'_>, g: &GridField) -> Result<Convolved> {
    convolve_on(e, g, &g.spec())
}

/// `(E*g)(x) = Σ_y w_y E(x−y) g(y)` at the nodes of `out`, with trapezoid
/// weights `w_y` on `g`'s grid and the product taken in the order `E · g`.
pub fn convolve_on(e: Kernel<'_>, g: &GridField, out: &GridSpec) -> Result<Convolved> {
    let n = g.dimension();
    if out.shape.len() != n {
        return Err(Error::Alignment(format!("output grid has {} axes, source has {n}", out.shape.len())));
    }
    // Grid kernels are looked up by index offset, which needs one lattice.
    let mut base = vec![0isize; n];
    match e {
        Kernel::Solution(sol) => {
            if sol.dimension() != n {
                return Err(Error::Alignment(format!("kernel expects {} coordinates, grid has {n}", sol.dimension())));
            }
        }
        Kernel::Grid(k) => {
            if k.dimension() != n {
                return Err(Error::Alignment(format!("kernel grid has {} axes, source has {n}", k.dimension())));
            }
            for a in 0..n {
                let h = g.spacing[a];
                let same = |x: f64| (x - h).abs() <= 1e-9 * h;
                if !same(k.spacing[a]) || !same(out.spacing[a]) {
                    return Err(Error::Alignment(format!(
                        "axis {a}: kernel, source and output spacings {} / {h} / {} differ",
                        k.spacing[a], out.spacing[a]
                    )));
                }
                let shift = (out.origin[a] - g.origin[a] - k.origin[a]) / h;
                if (shift - shift.round()).abs() > 1e-6 {
                    return Err(Error::Alignment(format!(
                        "axis {a}: kernel origin is off the difference lattice by {shift}"
                    )));
                }
                base[a] = shift.round() as isize;
            }
        }
    }
    let level = g.level().max(match e {
        Kernel::Grid(k) => k.level(),
        Kernel::Solution(_) => 0,
    });
    let scalar = level == 0;
    let sources: Vec<Source> = (0..g.len())
        .filter(|&i| g.values[i].norm_sqr() > 0.0)
        .map(|i| {
            let idx = g.multi_index(i);
            Source {
                point: g.point(i),
                weight: trapezoid_weight(g, &idx),
                idx: idx.iter().map(|&v| v as isize).collect(),
                scalar: g.values[i].scalar_part(),
                value: g.values[i].embed(level),
            }
        })
        .collect();
    let pairs = sources.len() * out.len();
    let blocked = pairs > DIRECT_PAIR_BUDGET;

    // Kernel cell at the origin, computed once when needed.
    let origin_cell: Option<std::result::Result<Ccd, f64>> = match e {
        Kernel::Solution(sol) if sol.eval_scalar(&vec![0.0; n]).is_err() => Some(match sol.cell_average(&g.spacing) {
            Some(avg) => Ok(avg),
            None => Err(cell_abs_integral(sol, &vec![0.0; n], &g.spacing)),
        }),
        _ => None,
    };

    let kernel_at = |xo: &[f64], oidx: &[isize], s: &Source| -> KVal {
        match e {
            Kernel::Solution(sol) => {
                // Offsets that sit on the source lattice are snapped onto it so
                // that rounding cannot move a node off the singular set.
                let d: Vec<f64> = xo
                    .iter()
                    .zip(&s.point)
                    .zip(&g.spacing)
                    .map(|((a, b), h)| {
                        let k = ((a - b) / h).round();
                        if (a - b - k * h).abs() <= 1e-9 * h {
                            k * h
                        } else {
                            a - b
                        }
                    })
                    .collect();
                match sol.eval_scalar(&d) {
                    Ok((a, b)) => {
                        if scalar {
                            KVal::Scalar(a, b)
                        } else {
                            KVal::Value(Ccd::scalar(0, a, b).embed(level))
                        }
                    }
                    Err(_) => {
                        let at_origin = d.iter().zip(&g.spacing).all(|(v, h)| v.abs() < 1e-9 * h);
                        match (&origin_cell, at_origin) {
                            (Some(Ok(avg)), true) => KVal::Averaged(avg.embed(level)),
                            (Some(Err(bound)), true) => KVal::Zero(*bound),
                            _ => KVal::Zero(cell_abs_integral(sol, &d, &g.spacing)),
                        }
                    }
                }
            }
            Kernel::Grid(k) => {
                let mut flat = 0usize;
                for a in 0..n {
                    let i = base[a] + oidx[a] - s.idx[a];
                    if i < 0 || i as usize >= k.shape[a] {
                        return KVal::Outside;
                    }
                    flat = flat * k.shape[a] + i as usize;
                }
                if scalar {
                    let (a, b) = k.values[flat].scalar_part();
                    KVal::Scalar(a, b)
                } else {
                    KVal::Value(k.values[flat].embed(level))
                }
            }
        }
    };

    let node = |o: usize| -> (Ccd, Tally) {
        let xo = out.point(o);
        let oidx: Vec<isize> = (0..n).map(|a| ((xo[a] - out.origin[a]) / out.spacing[a]).round() as isize).collect();
        let mut tally = Tally::default();
        let (mut sr, mut si) = (0.0, 0.0);
        let mut acc = Ccd::zero(level);
        for s in &sources {
            let kv = kernel_at(&xo, &oidx, s);
            let kv = match kv {
                KVal::Averaged(v) => {
                    tally.averaged += 1;
                    KVal::Value(v)
                }
                KVal::Zero(b) => {
                    tally.zeroed += 1;
                    tally.bound += b * s.value.norm() * s.weight / g.cell_volume();
                    continue;
                }
                other => other,
            };
            match kv {
                KVal::Scalar(a, b) => {
                    let (c, d) = s.scalar;
                    sr += s.weight * (a * c - b * d);
                    si += s.weight * (a * d + b * c);
                }
                KVal::Value(v) => {
                    if scalar {
                        let (a, b) = v.scalar_part();
                        let (c, d) = s.scalar;
                        sr += s.weight * (a * c - b * d);
                        si += s.weight * (a * d + b * c);
                    } else {
                        acc += &v.mul(&s.value).scale(s.weight);
                    }
                }
                _ => {}
            }
        }
        if scalar {
            (Ccd::scalar(0, sr, si), tally)
        } else {
            (acc, tally)
        }
    };

    let results: Vec<(Ccd, Tally)> =
        if blocked { (0..out.len()).into_par_iter().map(node).collect() } else { (0..out.len()).map(node).collect() };
    let tally = results.iter().fold(Tally::default(), |a, r| a.merge(r.1));
    let field = GridField::new(
        out.shape.clone(),
        out.origin.clone(),
        out.spacing.clone(),
        results.into_iter().map(|r| r.0).collect(),
    )?;
    Ok(Convolved {
        field,
        report: ConvolutionReport {
            pairs,
            blocked,
            averaged: tally.averaged,
            zeroed: tally.zeroed,
            zeroed_bound: tally.bound,
        },
    })
}

/// Sample a closed-form kernel on a grid; a node on the singular set gets the
/// exact cell mean when known and zero otherwise.
pub fn sample_kernel(sol: &FundamentalSolution, spec: &GridSpec) -> Result<GridField> {
    spec.sample(|x| match sol.eval(x) {
        Ok(v) => Ok(v),
        Err(Error::Singular(_)) => Ok(sol.cell_average(&spec.spacing).unwrap_or_else(|| Ccd::zero(0))),
        Err(other) => Err(other),
    })
}

/// `[...[K_1 * K_2] * ...] * K_m`, folded left in the listed order; the
/// partial products live on `K_1`'s grid and the last one on `out`.
pub fn iterated_convolution_on(kernels: &[&GridField], out: &GridSpec) -> Result<GridField> {
    if kernels.len() < 2 {
        return Err(Error::Spec("iterated convolution needs at least 2 kernels".into()));
    }
    let first = kernels[0].spec();
    let mut acc = kernels[0].clone();
    for (k, next) in kernels.iter().enumerate().skip(1) {
        let target = if k + 1 == kernels.len() { out } else { &first };
        acc = convolve_on(Kernel::Grid(&acc), next, target)?.field;
    }
    Ok(acc)
}

/// Left-nested fold on the first kernel's grid.
pub fn iterated_convolution(kernels: &[&GridField]) -> Result<GridField> {
    let first = kernels.first().ok_or_else(|| Error::Spec("iterated convolution needs at least 2 kernels".into()))?;
    iterated_convolution_on(kernels, &first.spec())
}

/// `E = (Υ + β)^* Ψ = Σ_j (∂_j Ψ) φ_j^* + Ψ β^*`, with fourth-order central
/// differences; the result drops two nodes at each end of every
/// differentiated axis.
pub fn first_order_fundamental(psi: &GridField, op: &HyperOp, beta: &Ccd) -> Result<GridField> {
    let n = psi.dimension();
    let mut axes = Vec::new();
    for t in &op.terms {
        let j = match t.alpha.iter().position(|&a| a > 0) {
            Some(j) if t.alpha.iter().sum::<u32>() == 1 => j,
            _ => return Err(Error::Spec("first_order_fundamental needs a first-order operator".into())),
        };
        if j >= n {
            return Err(Error::Stencil(format!("derivative along z{j} but the grid has {n} axes")));
        }
        if psi.shape[j] < 5 {
            return Err(Error::Stencil(format!("axis {j} has {} nodes; the stencil needs 5", psi.shape[j])));
        }
        if !axes.contains(&j) {
            axes.push(j);
        }
    }
    let mut shape = psi.shape.clone();
    let mut origin = psi.origin.clone();
    for &j in &axes {
        shape[j] -= 4;
        origin[j] += 2.0 * psi.spacing[j];
    }
    let level = psi.level().max(op.level).max(beta.level());
    let spec = GridSpec::new(shape, origin, psi.spacing.clone())?;
    let shift: Vec<usize> = (0..n).map(|k| if axes.contains(&k) { 2 } else { 0 }).collect();
    let cells: Vec<usize> = (0..spec.len()).collect();
    let values = cells
        .par_iter()
        .map(|&o| -> Result<Ccd> {
            let x = spec.point(o);
            let mut idx = vec![0usize; n];
            let mut r = o;
            for k in (0..n).rev() {
                idx[k] = r % spec.shape[k] + shift[k];
                r /= spec.shape[k];
            }
            let i = psi.flat_index(&idx);
            let mut xo = x.clone();
            xo.resize(xo.len().max(op.dimension), 0.0);
            let mut acc = Ccd::zero(level);
            for t in &op.terms {
                let j = t.alpha.iter().position(|&a| a > 0).expect("checked");
                let s = psi.stride(j) as isize;
                let v = |k: isize| psi.values[(i as isize + k * s) as usize].embed(level);
                let num = &(&(&v(-2) - &v(2)) + &v(1).scale(8.0)) - &v(-1).scale(8.0);
                let d = num.scale(1.0 / (12.0 * psi.spacing[j]));
                acc += &d.mul(&sum_terms(&t.coeff, &xo, level)?.conj_cd());
            }
            let mut b = beta.embed(level);
            if !op.zero_order.is_empty() {
                b += &sum_terms(&op.zero_order, &xo, level)?;
            }
            acc += &psi.values[i].embed(level).mul(&b.conj_cd());
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(spec.shape, spec.origin, spec.spacing, values)
}

/// Gaussian mollifier `η_ε(z) = (2π)^{−n/2} ε^{−n} exp(−|z|²/(2ε²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mollifier {
    pub eps: f64,
    pub n: usize,
}

pub fn mollified_delta(eps: f64, n: usize) -> Result<Mollifier> {
    if !(eps > 0.0) || n == 0 {
        return Err(Error::Domain(format!("mollifier needs eps > 0 and n >= 1, got eps = {eps}, n = {n}")));
    }
    Ok(Mollifier { eps, n })
}

impl Mollifier {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        (2.0 * std::f64::consts::PI).powf(-(self.n as f64) / 2.0)
            * self.eps.powi(-(self.n as i32))
            * (-r2 / (2.0 * self.eps * self.eps)).exp()
    }

    /// Cells per axis of the midpoint rule on `[-6ε, 6ε]^n`.
    fn cells(&self) -> usize {
        match self.n {
            1..=3 => 48,
            4 | 5 => 24,
            _ => 12,
        }
    }

    /// `∫ η_ε φ` by the midpoint rule on the `6ε` box.
    pub fn apply(&self, phi: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
        let m = self.cells();
        let h = 12.0 * self.eps / m as f64;
        let count = m.pow(self.n as u32);
        (0..count)
            .into_par_iter()
            .map(|c| {
                let mut r = c;
                let x: Vec<f64> = (0..self.n)
                    .map(|_| {
                        let i = r % m;
                        r /= m;
                        -6.0 * self.eps + (i as f64 + 0.5) * h
                    })
                    .collect();
                self.eval(&x) * phi(&x)
            })
            .sum::<f64>()
            * h.powi(self.n as i32)
    }

    pub fn mass(&self) -> f64 {
        self.apply(&|_| 1.0)
    }

    pub fn sample(&self, spec: &GridSpec) -> Result<GridField> {
        if spec.shape.len() != self.n {
            return Err(Error::Alignment(format!(
                "grid has {} axes, mollifier is {}-dimensional",
                spec.shape.len(),
                self.n
            )));
        }
        spec.sample(|x| Ok(Ccd::scalar(0, self.eval(x), 0.0)))
    }
}
