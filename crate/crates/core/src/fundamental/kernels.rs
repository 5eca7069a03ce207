//! Closed-form kernels: Laplace, ultrahyperbolic, heat, Helmholtz and the
//! Klein–Gordon symbol.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use super::bessel::{j0, y0};
use super::quadrature::gamma_half;
use crate::algebra::Ccd;
use crate::error::{Error, Result};

/// Regularization parameters for `(P + b𝐢ε)^λ`, relative to `|P|`.
pub const EPS_SCHEDULE: [f64; 4] = [1e-1, 3e-2, 1e-2, 3e-3];

/// `ε` in the Klein–Gordon symbol `1/(c² − P(ξ) + b𝐢ε)`.
pub const KG_EPSILON: f64 = 1e-1;

/// Highest dimension for which the Laplace constant is calibrated.
pub const MAX_LAPLACE_DIMENSION: usize = 8;

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `4π^{n/2}/Γ(n/2 − 1)`, as written for `σ_n`.
pub fn sigma_written(n: usize) -> f64 {
    4.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as f64 / 2.0 - 1.0)
}

/// Area of the unit sphere in `R^n`, `2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as f64 / 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceCalibration {
    pub n: usize,
    /// `−1/((n−2)σ_n)` with the written `σ_n`.
    pub written: f64,
    /// `−1/((n−2)|S^{n−1}|)`.
    pub standard: f64,
    /// `∫ |z|^{2−n} Δφ` for `φ = exp(−|z|²/2)`, by a cell-centred grid sum.
    pub moment: f64,
    /// `C·moment` for each candidate; the delta identity wants 1.
    pub written_delta: f64,
    pub standard_delta: f64,
    pub chosen: f64,
}

/// Midpoint sum of a radial integrand `f(|x|²)` over `[-L, L]^n` with `m`
/// cells per half-axis, visiting one representative per sorted octant tuple.
fn radial_grid_sum(n: usize, m: usize, half: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let h = half / m as f64;
    let sq: Vec<f64> = (0..m).map(|i| ((i as f64 + 0.5) * h).powi(2)).collect();
    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    fn walk(
        depth: usize,
        start: usize,
        acc: f64,
        counts: &mut Vec<usize>,
        sq: &[f64],
        fact: &[f64],
        f: &dyn Fn(f64) -> f64,
        out: &mut f64,
    ) {
        if depth == 0 {
            let mult = counts.iter().fold(fact[fact.len() - 1], |a, &c| a / fact[c]);
            *out += mult * f(acc);
            return;
        }
        for i in start..sq.len() {
            counts[i] += 1;
            walk(depth - 1, i, acc + sq[i], counts, sq, fact, f, out);
            counts[i] -= 1;
        }
    }
    let mut counts = vec![0usize; m];
    let mut out = 0.0;
    walk(n, 0, 0.0, &mut counts, &sq, &fact, f, &mut out);
    out * (2.0 * h).powi(n as i32)
}

fn calibrate(n: usize) -> LaplaceCalibration {
    let f = |r2: f64| r2.powf(1.0 - n as f64 / 2.0) * (r2 - n as f64) * (-r2 / 2.0).exp();
    let coarse = radial_grid_sum(n, 12, 6.0, &f);
    let fine = radial_grid_sum(n, 24, 6.0, &f);
    let moment = (4.0 * fine - coarse) / 3.0;
    let written = -1.0 / ((n as f64 - 2.0) * sigma_written(n));
    let standard = -1.0 / ((n as f64 - 2.0) * sphere_area(n));
    let (wd, sd) = (written * moment, standard * moment);
    let chosen = if (wd - 1.0).abs() <= (sd - 1.0).abs() { written } else { standard };
    LaplaceCalibration { n, written, standard, moment, written_delta: wd, standard_delta: sd, chosen }
}

/// Delta-test calibration of `C_n` (cached per dimension).
pub fn laplace_calibration(n: usize) -> Result<LaplaceCalibration> {
    if !(3..=MAX_LAPLACE_DIMENSION).contains(&n) {
        return Err(Error::Domain(format!("Laplace calibration covers 3 <= n <= {MAX_LAPLACE_DIMENSION}, got {n}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, LaplaceCalibration>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("calibration cache").get(&n) {
        return Ok(c.clone());
    }
    let c = calibrate(n);
    cache.lock().expect("calibration cache").insert(n, c.clone());
    Ok(c)
}

/// `C_n`: `−1/(4π)` at `n = 3`, calibrated above.
pub fn laplace_constant(n: usize) -> Result<f64> {
    match n {
        3 => Ok(-1.0 / (4.0 * PI)),
        _ => Ok(laplace_calibration(n)?.chosen),
    }
}

/// `Ψ_n(z)`: `C_n|z|^{2−n}` for `n ≥ 3`, `(1/4π) ln|z|²` for `n = 2`.
pub fn laplace_psi(n: usize, z: &[f64]) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("Laplace kernels need n >= 2, got {n}")));
    }
    if z.len() != n {
        return Err(Error::Spec(format!("point has {} coordinates, expected {n}", z.len())));
    }
    let r2: f64 = z.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Singular("Laplace kernel at the origin".into()));
    }
    if n == 2 {
        return Ok(r2.ln() / (4.0 * PI));
    }
    Ok(laplace_constant(n)? * r2.powf(1.0 - n as f64 / 2.0))
}

/// `∫_{[−1/2,1/2]³} dx/|x| = 3 ln(2+√3) − π/2`.
const CUBE_INVERSE_DISTANCE: f64 = 2.380_077_380_981_9;

/// Mean of `Ψ_3` over the cubic cell of side `h` centred at the origin.
pub fn laplace3_cell_average(h: f64) -> f64 {
    -CUBE_INVERSE_DISTANCE / (4.0 * PI * h)
}

/// `P(z) = Σ_{j<p} z_j² − Σ_{j≥p} z_j²`.
pub fn quadratic_form(p: usize, z: &[f64]) -> f64 {
    z.iter().enumerate().map(|(j, v)| if j < p { v * v } else { -v * v }).sum()
}

fn check_branch(b: i32) -> Result<f64> {
    match b {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::Domain(format!("branch must be +1 or -1, got {b}"))),
    }
}

/// Neville extrapolation of samples `(x_k, y_k)` to `x = 0`.
fn extrapolate_to_zero(x: &[f64], y: &[(f64, f64)]) -> (f64, f64) {
    let mut t = y.to_vec();
    for k in 1..x.len() {
        for i in (k..x.len()).rev() {
            let d = x[i - k] - x[i];
            let (a, b) = (t[i], t[i - 1]);
            t[i] = ((x[i - k] * a.0 - x[i] * b.0) / d, (x[i - k] * a.1 - x[i] * b.1) / d);
        }
    }
    t[x.len() - 1]
}

/// `(P + b𝐢0)^λ` (or `ln(P + b𝐢0)` when `log`) from the regularized values
/// `(P² + ε²)^{λ/2} exp(𝐢λ arg(P + b𝐢ε))` on the schedule `ε = s|P|`.
fn regularized_power(pv: f64, lambda: f64, b: f64, log: bool) -> (f64, f64) {
    let eps: Vec<f64> = EPS_SCHEDULE.iter().map(|s| s * pv.abs()).collect();
    let vals: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let modulus2 = pv * pv + e * e;
            let arg = (b * e).atan2(pv);
            if log {
                (0.5 * modulus2.ln(), arg)
            } else {
                let m = modulus2.powf(lambda / 2.0);
                (m * (lambda * arg).cos(), m * (lambda * arg).sin())
            }
        })
        .collect();
    extrapolate_to_zero(&eps, &vals)
}

/// The exact boundary value: `|P|^λ exp(𝐢πλ b θ(−P))`, or its logarithm.
pub fn boundary_power(pv: f64, lambda: f64, b: f64, log: bool) -> (f64, f64) {
    let arg = if pv < 0.0 { b * PI } else { 0.0 };
    if log {
        (pv.abs().ln(), arg)
    } else {
        let m = pv.abs().powf(lambda);
        (m * (lambda * arg).cos(), m * (lambda * arg).sin())
    }
}

/// Prefactor of the `n = 2` logarithmic kernel.
pub const HYPERBOLIC_LOG_CONSTANT: f64 = 1.0 / (4.0 * PI);

/// Ultrahyperbolic `Ψ_{p,q}`: `−exp(πbq𝐢/2) Γ(n/2−1) (P + b𝐢0)^{1−n/2} / (4π^{n/2})`
/// for `n ≥ 3` and `exp(πbq𝐢/2) ln(P + b𝐢0) / (4π)` for `p = q = 1`.
pub fn hyperbolic_psi(p: usize, q: usize, b: i32, z: &[f64]) -> Result<Ccd> {
    let (re, im) = hyperbolic_scalar(p, q, b, z)?;
    Ok(Ccd::scalar(0, re, im))
}

pub(crate) fn hyperbolic_scalar(p: usize, q: usize, b: i32, z: &[f64]) -> Result<(f64, f64)> {
    let bf = check_branch(b)?;
    if p == 0 || q == 0 {
        return Err(Error::Domain("hyperbolic kernels need p >= 1 and q >= 1".into()));
    }
    let n = p + q;
    if z.len() != n {
        return Err(Error::Spec(format!("point has {} coordinates, expected {n}", z.len())));
    }
    let pv = quadratic_form(p, z);
    if pv.abs() <= 1e-12 * z.iter().map(|v| v * v).sum::<f64>() || pv == 0.0 {
        return Err(Error::Singular(format!("point {z:?} lies on the light cone")));
    }
    let phase = PI * bf * q as f64 / 2.0;
    let (pc, ps) = (phase.cos(), phase.sin());
    let (re, im, scale) = if n == 2 {
        let (a, c) = regularized_power(pv, 0.0, bf, true);
        (a, c, HYPERBOLIC_LOG_CONSTANT)
    } else {
        let lambda = 1.0 - n as f64 / 2.0;
        let (a, c) = regularized_power(pv, lambda, bf, false);
        (a, c, -gamma_half(n as f64 / 2.0 - 1.0) / (4.0 * PI.powf(n as f64 / 2.0)))
    };
    Ok((scale * (pc * re - ps * im), scale * (pc * im + ps * re)))
}

/// Heat kernel `θ(z0) [2a(πz0)^{1/2}]^{−m} exp(−|x|²/(4a²z0))`.
pub fn heat_kernel(m: usize, a: f64, z0: f64, x: &[f64]) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs a > 0, got {a}")));
    }
    if x.len() != m {
        return Err(Error::Spec(format!("point has {} spatial coordinates, expected {m}", x.len())));
    }
    if z0 <= 0.0 {
        return Ok(0.0);
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * a * (PI * z0).sqrt()).powi(-(m as i32)) * (-r2 / (4.0 * a * a * z0)).exp())
}

/// Helmholtz `Ψ` for `Δ + c²`: `−exp(bc𝐢|x|)/(4π|x|)` in three dimensions,
/// `−𝐢H_0^{(1)}(c|x|)/4` (`b = 1`) or `𝐢H_0^{(2)}(c|x|)/4` (`b = −1`) in two.
pub fn helmholtz_psi(n: usize, c: f64, b: i32, x: &[f64]) -> Result<Ccd> {
    let (re, im) = helmholtz_scalar(n, c, b, x)?;
    Ok(Ccd::scalar(0, re, im))
}

pub(crate) fn helmholtz_scalar(n: usize, c: f64, b: i32, x: &[f64]) -> Result<(f64, f64)> {
    let bf = check_branch(b)?;
    if x.len() != n {
        return Err(Error::Spec(format!("point has {} coordinates, expected {n}", x.len())));
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Singular("Helmholtz kernel at the origin".into()));
    }
    match n {
        3 if c >= 0.0 => {
            let s = -1.0 / (4.0 * PI * r);
            Ok((s * (c * r).cos(), s * bf * (c * r).sin()))
        }
        2 if c > 0.0 => {
            // b = 1: −𝐢(J + 𝐢Y)/4; b = −1: 𝐢(J − 𝐢Y)/4
            let (j, y) = (j0(c * r), y0(c * r));
            Ok((y / 4.0, -bf * j / 4.0))
        }
        2 | 3 => Err(Error::Domain(format!("Helmholtz kernel needs c > 0, got {c}"))),
        _ => Err(Error::Domain(format!("Helmholtz kernels exist for n = 2, 3, got {n}"))),
    }
}

/// Symbol `1/(c² − P(ξ) + b𝐢ε)`.
pub fn klein_gordon_fourier(p: usize, c: f64, b: i32, eps: f64, xi: &[f64]) -> Result<Ccd> {
    let bf = check_branch(b)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("regularization needs eps > 0, got {eps}")));
    }
    let re = c * c - quadratic_form(p, xi);
    let im = bf * eps;
    let d = re * re + im * im;
    Ok(Ccd::scalar(0, re / d, -im / d))
}
