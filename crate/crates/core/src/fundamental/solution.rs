use std::fmt;

use serde::{Deserialize, Serialize};

use super::kernels::{
    heat_kernel, helmholtz_scalar, hyperbolic_scalar, klein_gordon_fourier, laplace3_cell_average, laplace_constant,
    KG_EPSILON,
};
use crate::algebra::Ccd;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kind {
    Laplace {
        n: usize,
    },
    Hyperbolic {
        p: usize,
        q: usize,
        b: i32,
    },
    /// Coordinates are `(z0, x_1..x_m)` with `z0` the time.
    Heat {
        m: usize,
        a: f64,
    },
    Wave3d,
    Helmholtz {
        n: usize,
        c: f64,
        b: i32,
    },
    KleinGordon {
        p: usize,
        q: usize,
        c: f64,
        b: i32,
    },
}

/// A fundamental solution with its constants resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSolution {
    pub kind: Kind,
    /// `C_n` for Laplace kinds with `n ≥ 3`.
    constant: Option<f64>,
}

impl FundamentalSolution {
    pub fn new(kind: Kind) -> Result<Self> {
        let branch = |b: i32| {
            if b == 1 || b == -1 {
                Ok(())
            } else {
                Err(Error::Domain(format!("branch must be +1 or -1, got {b}")))
            }
        };
        let mut constant = None;
        match kind {
            Kind::Laplace { n } if n < 2 => return Err(Error::Domain(format!("Laplace kernels need n >= 2, got {n}"))),
            Kind::Laplace { n } if n >= 3 => constant = Some(laplace_constant(n)?),
            Kind::Laplace { .. } | Kind::Wave3d => {}
            Kind::Hyperbolic { p, q, b } | Kind::KleinGordon { p, q, b, .. } => {
                branch(b)?;
                if p == 0 || q == 0 {
                    return Err(Error::Domain("hyperbolic signatures need p >= 1 and q >= 1".into()));
                }
            }
            Kind::Heat { m, a } => {
                if m == 0 || !(a > 0.0) {
                    return Err(Error::Domain(format!("heat kernel needs m >= 1 and a > 0, got m = {m}, a = {a}")));
                }
            }
            Kind::Helmholtz { n, c, b } => {
                branch(b)?;
                if !(n == 2 || n == 3) || !(c > 0.0 || (n == 3 && c == 0.0)) {
                    return Err(Error::Domain(format!(
                        "Helmholtz kernel needs n in {{2, 3}} and c > 0, got n = {n}, c = {c}"
                    )));
                }
            }
        }
        Ok(FundamentalSolution { kind, constant })
    }

    /// Number of coordinates the evaluator expects.
    pub fn dimension(&self) -> usize {
        match self.kind {
            Kind::Laplace { n } | Kind::Helmholtz { n, .. } => n,
            Kind::Hyperbolic { p, q, .. } | Kind::KleinGordon { p, q, .. } => p + q,
            Kind::Heat { m, .. } => m + 1,
            Kind::Wave3d => 4,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.kind, Kind::Laplace { .. } | Kind::Heat { .. } | Kind::Wave3d)
    }

    pub fn singular_set(&self) -> &'static str {
        match self.kind {
            Kind::Laplace { .. } | Kind::Helmholtz { .. } => "origin",
            Kind::Hyperbolic { .. } => "light cone P(z) = 0",
            Kind::Heat { .. } => "plane z0 = 0 (kernel vanishes for z0 <= 0)",
            Kind::Wave3d => "forward light cone t = |x| (measure supported there)",
            Kind::KleinGordon { .. } => "mass shell in frequency space",
        }
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dimension() {
            return Err(Error::Spec(format!("point has {} coordinates, expected {}", z.len(), self.dimension())));
        }
        Ok(())
    }

    /// Value at a point off the singular set.
    pub fn eval(&self, z: &[f64]) -> Result<Ccd> {
        let (a, b) = self.eval_scalar(z)?;
        Ok(Ccd::scalar(0, a, b))
    }

    /// Value as a complex pair `(re, 𝐢-part)`; every kind is scalar-valued.
    pub fn eval_scalar(&self, z: &[f64]) -> Result<(f64, f64)> {
        self.check_len(z)?;
        match self.kind {
            Kind::Laplace { n } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    return Err(Error::Singular("Laplace kernel at the origin".into()));
                }
                let v = match self.constant {
                    Some(c) => c * r2.powf(1.0 - n as f64 / 2.0),
                    None => r2.ln() / (4.0 * std::f64::consts::PI),
                };
                Ok((v, 0.0))
            }
            Kind::Hyperbolic { p, q, b } => hyperbolic_scalar(p, q, b, z),
            Kind::Heat { m, a } => Ok((heat_kernel(m, a, z[0], &z[1..])?, 0.0)),
            Kind::Helmholtz { n, c, b } => helmholtz_scalar(n, c, b, z),
            Kind::Wave3d => Err(Error::Spec("the wave kernel is a measure on the light cone; use wave3d_apply".into())),
            Kind::KleinGordon { .. } => {
                Err(Error::Spec("the Klein-Gordon kernel is available as a Fourier symbol only".into()))
            }
        }
    }

    /// Fourier symbol of the Klein–Gordon kind at `ε = KG_EPSILON`.
    pub fn symbol(&self, xi: &[f64]) -> Result<Ccd> {
        self.check_len(xi)?;
        match self.kind {
            Kind::KleinGordon { p, c, b, .. } => klein_gordon_fourier(p, c, b, KG_EPSILON, xi),
            _ => Err(Error::Spec("only the Klein-Gordon kind is given by its symbol".into())),
        }
    }

    /// Exact mean over the grid cell centred on the singular point, where known.
    pub fn cell_average(&self, spacing: &[f64]) -> Option<Ccd> {
        match self.kind {
            Kind::Laplace { n: 3 }
                if spacing.len() == 3 && spacing.iter().all(|&h| (h - spacing[0]).abs() <= 1e-12 * h) =>
            {
                Some(Ccd::scalar(0, laplace3_cell_average(spacing[0]), 0.0))
            }
            _ => None,
        }
    }

    /// Parse `name` or `name:key=value,...`, e.g. `helmholtz:n=2,c=1.5,b=-1`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let mut map = std::collections::HashMap::new();
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse { offset: 0, message: format!("expected key=value, got '{kv}'") })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse { offset: 0, message: format!("bad number for '{}': '{v}'", k.trim()) })?;
            map.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| -> Result<f64> {
            map.get(k).copied().ok_or_else(|| Error::Spec(format!("'{name}' needs parameter '{k}'")))
        };
        let int = |k: &str| -> Result<usize> {
            let v = get(k)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Spec(format!("parameter '{k}' must be a non-negative integer")));
            }
            Ok(v as usize)
        };
        let branch = || -> Result<i32> { Ok(map.get("b").copied().unwrap_or(1.0) as i32) };
        let kind = match name.trim() {
            "laplace" => Kind::Laplace { n: int("n")? },
            "hyperbolic" => Kind::Hyperbolic { p: int("p")?, q: int("q")?, b: branch()? },
            "heat" => Kind::Heat { m: int("m")?, a: get("a")? },
            "wave3d" => Kind::Wave3d,
            "helmholtz" => Kind::Helmholtz { n: int("n")?, c: get("c")?, b: branch()? },
            "klein_gordon" => Kind::KleinGordon { p: int("p")?, q: int("q")?, c: get("c")?, b: branch()? },
            other => {
                return Err(Error::Spec(format!(
                    "unknown kernel '{other}' (laplace, hyperbolic, heat, wave3d, helmholtz, klein_gordon)"
                )))
            }
        };
        FundamentalSolution::new(kind)
    }
}

impl fmt::Display for FundamentalSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Laplace { n } => write!(f, "laplace:n={n}"),
            Kind::Hyperbolic { p, q, b } => write!(f, "hyperbolic:p={p},q={q},b={b}"),
            Kind::Heat { m, a } => write!(f, "heat:m={m},a={a}"),
            Kind::Wave3d => write!(f, "wave3d"),
            Kind::Helmholtz { n, c, b } => write!(f, "helmholtz:n={n},c={c},b={b}"),
            Kind::KleinGordon { p, q, c, b } => write!(f, "klein_gordon:p={p},q={q},c={c},b={b}"),
        }
    }
}
