use std::f64::consts::PI;

use super::quadrature::{adaptive_simpson, gauss_legendre};
use crate::error::Result;

/// Polar order of the product sphere rule; exact for spherical
/// polynomials of degree below `2 * SPHERE_ORDER`.
const SPHERE_ORDER: usize = 24;

/// Fixed-order product rule on the unit sphere: Gauss–Legendre in `cos θ`
/// times the trapezoid rule in the azimuth. Weights sum to `4π`.
pub fn sphere_rule() -> Vec<([f64; 3], f64)> {
    let (u, w) = gauss_legendre(SPHERE_ORDER);
    let m = 2 * SPHERE_ORDER;
    let mut out = Vec::with_capacity(SPHERE_ORDER * m);
    for (ui, wi) in u.iter().zip(&w) {
        let s = (1.0 - ui * ui).sqrt();
        for k in 0..m {
            let phi = 2.0 * PI * (k as f64 + 0.5) / m as f64;
            out.push(([s * phi.cos(), s * phi.sin(), *ui], wi * 2.0 * PI / m as f64));
        }
    }
    out
}

/// `⟨ℰ_3, φ⟩ = (1/4π) ∫_0^∞ t ∫_{S²} φ(t, tω) dω dt` for `φ` supported in
/// `|(t, x)| < R`.
pub fn wave3d_apply(phi: &(dyn Fn(f64, [f64; 3]) -> f64 + Sync), radius: f64) -> Result<f64> {
    let rule = sphere_rule();
    let shell = |t: f64| -> f64 {
        let s: f64 = rule.iter().map(|(w, c)| c * phi(t, [t * w[0], t * w[1], t * w[2]])).sum();
        t * s
    };
    // Fixed panels first so that narrow supports are never skipped.
    let panels = 32;
    let h = radius / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        total += adaptive_simpson(&shell, k as f64 * h, (k + 1) as f64 * h, 1e-12, 30)?;
    }
    Ok(total / (4.0 * PI))
}
