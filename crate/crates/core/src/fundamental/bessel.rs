//! Bessel functions of order 0 and 1 for real positive arguments.

use serde::{Deserialize, Serialize};

use crate::algebra::Ccd;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument the power series is summed; above it the Hankel
/// expansion is used.
pub const SWITCH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BesselKind {
    J,
    Y,
    I,
    K,
    H1,
    H2,
}

impl std::str::FromStr for BesselKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "J" => BesselKind::J,
            "Y" => BesselKind::Y,
            "I" => BesselKind::I,
            "K" => BesselKind::K,
            "H1" => BesselKind::H1,
            "H2" => BesselKind::H2,
            _ => return Err(Error::Spec(format!("unknown Bessel kind '{s}' (J, Y, I, K, H1, H2)"))),
        })
    }
}

/// `kind_order(z)` as a complex scalar; only the Hankel kinds have an `𝐢` part.
pub fn bessel(kind: BesselKind, order: u32, z: f64) -> Result<Ccd> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("Bessel functions need a positive finite argument, got {z}")));
    }
    if order > 1 {
        return Err(Error::Domain(format!("only orders 0 and 1 are available, got {order}")));
    }
    let (a, b) = match kind {
        BesselKind::J => (jn(order, z), 0.0),
        BesselKind::Y => (yn(order, z), 0.0),
        BesselKind::I => (in_(order, z), 0.0),
        BesselKind::K => (kn(order, z), 0.0),
        BesselKind::H1 => (jn(order, z), yn(order, z)),
        BesselKind::H2 => (jn(order, z), -yn(order, z)),
    };
    Ok(Ccd::scalar(0, a, b))
}

fn jn(order: u32, z: f64) -> f64 {
    if order == 0 {
        j0(z)
    } else {
        j1(z)
    }
}

fn yn(order: u32, z: f64) -> f64 {
    if order == 0 {
        y0(z)
    } else {
        y1(z)
    }
}

fn in_(order: u32, z: f64) -> f64 {
    if order == 0 {
        i0(z)
    } else {
        i1(z)
    }
}

fn kn(order: u32, z: f64) -> f64 {
    if order == 0 {
        k0(z)
    } else {
        k1(z)
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// `Σ_m sign^m (z²/4)^m / (m! (m+ν)!) · w(m)` for ν ∈ {0, 1}, without the
/// `(z/2)^ν` prefactor.
fn power_series(nu: u32, z: f64, alternating: bool, w: impl Fn(u32) -> f64) -> f64 {
    let q = if alternating { -z * z / 4.0 } else { z * z / 4.0 };
    let mut term = 1.0;
    let mut sum = Sum::default();
    let mut peak = 0.0f64;
    for m in 0..500u32 {
        let t = term * w(m);
        sum.add(t);
        peak = peak.max(t.abs());
        if m > 2 && term.abs() < 1e-18 * peak.max(1e-300) {
            break;
        }
        term *= q / (((m + 1) * (m + 1 + nu)) as f64);
    }
    sum.value()
}

fn harmonic(m: u32) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

/// Hankel asymptotic sums `(P, Q)` truncated at the smallest term.
fn hankel_pq(nu: u32, z: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let (mut p, mut q) = (Sum::default(), Sum::default());
    let mut a: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60u32 {
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            0 => p.add(a),
            1 => q.add(a),
            2 => p.add(-a),
            _ => q.add(-a),
        }
        let odd = (2 * k + 1) as f64;
        a *= (mu - odd * odd) / ((k + 1) as f64 * 8.0 * z);
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p.value(), q.value())
}

/// `Σ a_k(ν)/z^k` with every sign `s^k`, truncated at the smallest term.
fn modified_asymptotic(nu: u32, z: f64, s: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut sum = Sum::default();
    let mut a: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60u32 {
        if a.abs() > last {
            break;
        }
        last = a.abs();
        sum.add(a);
        let odd = (2 * k + 1) as f64;
        a *= s * (mu - odd * odd) / ((k + 1) as f64 * 8.0 * z);
        if a.abs() < 1e-17 {
            break;
        }
    }
    sum.value()
}

fn hankel_jy(nu: u32, z: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, z);
    let chi = z - (nu as f64 / 2.0 + 0.25) * std::f64::consts::PI;
    let amp = (2.0 / (std::f64::consts::PI * z)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

pub fn j0(z: f64) -> f64 {
    if z < SWITCH {
        power_series(0, z, true, |_| 1.0)
    } else {
        hankel_jy(0, z).0
    }
}

pub fn j1(z: f64) -> f64 {
    if z < SWITCH {
        z / 2.0 * power_series(1, z, true, |_| 1.0)
    } else {
        hankel_jy(1, z).0
    }
}

pub fn y0(z: f64) -> f64 {
    use std::f64::consts::PI;
    if z < SWITCH {
        let s = power_series(0, z, true, |m| -harmonic(m));
        2.0 / PI * (((z / 2.0).ln() + EULER_GAMMA) * j0(z) + s)
    } else {
        hankel_jy(0, z).1
    }
}

pub fn y1(z: f64) -> f64 {
    use std::f64::consts::PI;
    if z < SWITCH {
        let s = power_series(1, z, true, |m| harmonic(m) + harmonic(m + 1) - 2.0 * EULER_GAMMA);
        2.0 / PI * j1(z) * (z / 2.0).ln() - 2.0 / (PI * z) - z / (2.0 * PI) * s
    } else {
        hankel_jy(1, z).1
    }
}

pub fn i0(z: f64) -> f64 {
    if z < SWITCH {
        power_series(0, z, false, |_| 1.0)
    } else {
        z.exp() / (2.0 * std::f64::consts::PI * z).sqrt() * modified_asymptotic(0, z, -1.0)
    }
}

pub fn i1(z: f64) -> f64 {
    if z < SWITCH {
        z / 2.0 * power_series(1, z, false, |_| 1.0)
    } else {
        z.exp() / (2.0 * std::f64::consts::PI * z).sqrt() * modified_asymptotic(1, z, -1.0)
    }
}

/// `∫_0^∞ exp(−z (cosh t − 1)) cosh(νt) dt` by the trapezoid rule, which is
/// spectrally accurate for this even analytic integrand.
fn k_integral(nu: u32, z: f64) -> f64 {
    let h = 0.05;
    let mut sum = Sum::default();
    sum.add(0.5);
    for k in 1.. {
        let t = k as f64 * h;
        let e = (-z * (t.cosh() - 1.0)).exp();
        let v = if nu == 0 { e } else { e * t.cosh() };
        sum.add(v);
        if e < 1e-19 {
            break;
        }
    }
    h * sum.value()
}

pub fn k0(z: f64) -> f64 {
    if z <= 2.0 {
        let s = power_series(0, z, false, harmonic);
        -((z / 2.0).ln() + EULER_GAMMA) * i0(z) + s
    } else if z < SWITCH {
        (-z).exp() * k_integral(0, z)
    } else {
        (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * modified_asymptotic(0, z, 1.0)
    }
}

pub fn k1(z: f64) -> f64 {
    if z <= 2.0 {
        let s = power_series(1, z, false, |m| harmonic(m) + harmonic(m + 1) - 2.0 * EULER_GAMMA);
        1.0 / z + (z / 2.0).ln() * i1(z) - z / 4.0 * s
    } else if z < SWITCH {
        (-z).exp() * k_integral(1, z)
    } else {
        (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * modified_asymptotic(1, z, 1.0)
    }
}
