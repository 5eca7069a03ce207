//! Invariant suites behind `hypercd check`: each suite runs a handful of
//! seeded numerical identities and reports the worst residual per case.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{self, real_scalar_product, CdNumber};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::factorize::{self, FactorOptions, Grid, OperatorSpec, VerifyMode, VerifyOptions};
use crate::fundamental::{self as fs, quadrature, GridSpec, Kernel};
use crate::line_integral::{self as li, LineOptions, Path};
use crate::quadform;
use crate::Ccd;

const DALEMBERT: &str = include_str!("../../../specs/dalembert.json");
const LAPLACE3: &str = include_str!("../../../specs/laplace3.json");
const ELLIPTIC4: &str = include_str!("../../../specs/elliptic4_variable.json");

pub const SUITES: &[&str] = &[
    "algebra",
    "expr",
    "quadform",
    "factorize",
    "line_integral",
    "fundamental.laplace",
    "fundamental.hyperbolic",
    "fundamental.heat",
    "fundamental.wave",
    "fundamental.helmholtz",
    "fundamental.klein_gordon",
    "fundamental.convolution",
];

#[derive(Debug, Clone, Serialize)]
pub struct Case {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub suite: String,
    pub seed: u64,
    pub cases: Vec<Case>,
    pub max_residual: f64,
    pub pass: bool,
}

struct Cases {
    prefix: &'static str,
    tol_override: Option<f64>,
    out: Vec<Case>,
}

impl Cases {
    fn push(&mut self, name: impl AsRef<str>, residual: f64, tolerance: f64) {
        let tolerance = self.tol_override.unwrap_or(tolerance);
        self.out.push(Case {
            name: format!("{}/{}", self.prefix, name.as_ref()),
            residual,
            tolerance,
            pass: residual <= tolerance,
        });
    }
}

/// Run one suite, a `fundamental` group, or `all`. `tol` replaces every
/// per-case tolerance when given.
pub fn run_check(suite: &str, seed: u64, tol: Option<f64>) -> Result<CheckReport> {
    let selected: Vec<&'static str> = match suite {
        "all" => SUITES.to_vec(),
        "fundamental" => SUITES.iter().copied().filter(|s| s.starts_with("fundamental.")).collect(),
        s => match SUITES.iter().find(|&&k| k == s) {
            Some(&k) => vec![k],
            None => {
                return Err(Error::Spec(format!("unknown suite '{s}'; known: all, fundamental, {}", SUITES.join(", "))))
            }
        },
    };
    let mut cases = Vec::new();
    for name in selected {
        let mut c = Cases { prefix: name, tol_override: tol, out: Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match name {
            "algebra" => algebra_suite(&mut c, &mut rng)?,
            "expr" => expr_suite(&mut c, &mut rng)?,
            "quadform" => quadform_suite(&mut c, &mut rng)?,
            "factorize" => factorize_suite(&mut c, &mut rng)?,
            "line_integral" => line_integral_suite(&mut c, &mut rng)?,
            "fundamental.laplace" => laplace_suite(&mut c, &mut rng)?,
            "fundamental.hyperbolic" => hyperbolic_suite(&mut c, &mut rng)?,
            "fundamental.heat" => heat_suite(&mut c, &mut rng)?,
            "fundamental.wave" => wave_suite(&mut c)?,
            "fundamental.helmholtz" => helmholtz_suite(&mut c, &mut rng)?,
            "fundamental.klein_gordon" => klein_gordon_suite(&mut c)?,
            "fundamental.convolution" => convolution_suite(&mut c)?,
            _ => unreachable!(),
        }
        cases.extend(c.out);
    }
    let max_residual = cases.iter().map(|c| c.residual).fold(0.0, f64::max);
    let pass = cases.iter().all(|c| c.pass);
    Ok(CheckReport { suite: suite.to_string(), seed, cases, max_residual, pass })
}

fn random_cd(rng: &mut ChaCha8Rng, level: u32) -> CdNumber {
    CdNumber::from_coeffs((0..1usize << level).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("power of two")
}

fn algebra_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    for level in 1..=4u32 {
        let dim = 1usize << level;
        let mut worst = 0.0f64;
        for k in 1..dim {
            let ik = CdNumber::basis(level, k);
            worst = worst.max(ik.mul(&ik).max_abs_diff(&CdNumber::real(level, -1.0)));
            for l in 1..dim {
                let il = CdNumber::basis(level, l);
                if l != k {
                    worst = worst.max((&ik.mul(&il) + &il.mul(&ik)).norm());
                }
                worst = worst.max((&ik.mul(&ik.mul(&il)) + &il).norm());
            }
        }
        c.push(format!("generators/level{level}"), worst, 0.0);

        let (mut norm, mut conj) = (0.0f64, 0.0f64);
        for _ in 0..500 {
            let (x, y) = (random_cd(rng, level), random_cd(rng, level));
            let xy = x.mul(&y);
            if level <= 3 {
                norm = norm.max((xy.norm() - x.norm() * y.norm()).abs());
            }
            conj = conj.max(xy.conj().max_abs_diff(&y.conj().mul(&x.conj())));
        }
        if level <= 3 {
            c.push(format!("norm_multiplicative/level{level}"), norm, 1e-12);
        }
        c.push(format!("conjugate_reverses/level{level}"), conj, 1e-12);

        let mut inv = 0.0f64;
        let mut proj = 0.0f64;
        for _ in 0..100 {
            let x = random_cd(rng, level);
            if level <= 3 {
                inv = inv.max(x.mul(&x.inverse()?).max_abs_diff(&CdNumber::one(level)));
            }
            for j in 0..dim {
                proj =
                    proj.max((algebra::project_coordinate_formula(&x, j)? - algebra::project_coordinate(&x, j)?).abs());
            }
            let r = real_scalar_product(&x, &x) - x.norm_sqr();
            proj = proj.max(r.abs());
        }
        if level <= 3 {
            c.push(format!("inverse/level{level}"), inv, 1e-12);
        }
        c.push(format!("coordinate_formula/level{level}"), proj, 1e-12);
    }
    Ok(())
}

fn expr_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let sources = ["sin(z0)*exp(z1) - z2^3/(2 + z0^2)", "sqrt(1 + z1^2)*cos(z2) + z0*z1*z2", "(z0 - 1)^4 + ln(3 + z2)"];
    let (mut round, mut deriv) = (0.0f64, 0.0f64);
    for s in sources {
        let e = expr::parse(s, 3)?;
        let again = expr::parse(&e.to_string(), 3)?;
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.9..0.9)).collect();
            round = round.max((e.eval_real(&x)? - again.eval_real(&x)?).abs());
            for j in 0..3 {
                let h = 1e-4;
                let at = |d: f64| -> Result<f64> {
                    let mut y = x.clone();
                    y[j] += d;
                    e.eval_real(&y)
                };
                let fd = (at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h);
                deriv = deriv.max((e.diff(j).eval_real(&x)? - fd).abs());
            }
        }
    }
    c.push("print_parse_round_trip", round, 1e-12);
    c.push("derivative_vs_differences", deriv, 1e-8);
    Ok(())
}

fn quadform_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let (mut diag, mut orth) = (0.0f64, 0.0f64);
    let mut signature = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=6);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let red = quadform::reduce_to_squares(&a)?;
        for k in 0..n {
            for l in 0..n {
                let ctac: f64 = (0..n).map(|i| (0..n).map(|j| red.c[i][k] * a[i][j] * red.c[j][l]).sum::<f64>()).sum();
                diag = diag.max((ctac - if k == l { red.b[k] } else { 0.0 }).abs());
                let ctc: f64 = (0..n).map(|i| red.c[i][k] * red.c[i][l]).sum();
                orth = orth.max((ctc - if k == l { 1.0 } else { 0.0 }).abs());
            }
        }
        let (p, q) = (red.b.iter().filter(|&&b| b > 0.0).count(), red.b.iter().filter(|&&b| b < 0.0).count());
        signature = signature.max(((p != red.p) || (q != red.q)) as u8 as f64);
    }
    c.push("congruence_diagonalizes", diag, 1e-12);
    c.push("orthogonal", orth, 1e-12);
    c.push("signature_counts", signature, 0.0);
    Ok(())
}

fn factorize_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let symbolic = VerifyOptions {
        grid: Grid { nodes: 5, ..Grid::default() },
        mode: VerifyMode::Symbolic,
        ..VerifyOptions::default()
    };
    let fd = VerifyOptions {
        grid: Grid { nodes: 7, ..Grid::default() },
        mode: VerifyMode::FiniteDifference,
        ..VerifyOptions::default()
    };

    let f = factorize::factorize(&OperatorSpec::from_json(DALEMBERT)?, FactorOptions::default())?;
    let cubics: Vec<Expr> = (0..5).map(|_| factorize::random_polynomial(4, 3, rng)).collect();
    c.push("dalembert/cubics", factorize::verify_factorization(&f, &cubics, &symbolic)?.max_residual, 1e-12);
    c.push("dalembert/remainder_terms", f.remainder.len() as f64, 0.0);

    let f = factorize::factorize(&OperatorSpec::from_json(LAPLACE3)?, FactorOptions::default())?;
    c.push(
        "laplace3/gaussian",
        factorize::verify_factorization(&f, &[factorize::gaussian(3)], &fd)?.max_residual,
        1e-8,
    );

    let f = factorize::factorize(&OperatorSpec::from_json(ELLIPTIC4)?, FactorOptions::default())?;
    c.push(
        "elliptic4_variable/gaussian",
        factorize::verify_factorization(&f, &[factorize::gaussian(4)], &fd)?.max_residual,
        1e-8,
    );
    Ok(())
}

fn line_integral_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let mu = li::parse_phrase("(i1*z)*(i2*z) + 0.5*z^2 - [1+i3]*z + i5*(z*i6)")?;
    let kappa = mu.left_antiderivative();
    let one = CdNumber::one(3);
    let (mut left, mut kappa_diff) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let z = random_cd(rng, 3);
        left = left.max(kappa.derivative_apply(&z, &one).max_abs_diff(&mu.eval(&z)));
    }
    let opts = LineOptions::default();
    for _ in 0..3 {
        let path = Path::new((0..3).map(|_| random_cd(rng, 3).scale(0.5)).collect())?;
        let v = li::line_integrate(&mu, &path, None, &opts)?;
        let exact = &kappa.eval(path.end()) - &kappa.eval(path.start());
        kappa_diff = kappa_diff.max(v.max_abs_diff(&exact) / (1.0 + exact.norm()));
    }
    c.push("left_antiderivative", left, 1e-12);
    c.push("integral_equals_kappa_difference", kappa_diff, 1e-9);

    let op = li::PsiOperator::constant(2, &[(1, 2.0)])?;
    let e = expr::parse("z0*z1 - z1^3*i2 + z2*i3 + 1", 4)?;
    let f = move |z: &CdNumber| Ok(e.eval(z.coeffs())?.embed(2));
    let grid = li::TargetGrid { shape: vec![5, 9, 5], origin: vec![-0.5, -1.0, -0.5], spacing: vec![0.25; 3] };
    let z0 = CdNumber::zero(2);
    let big = li::antiderivative_field(&f, &op, &z0, &grid, li::PathFamily::Staircase, &opts)?;
    let small = grid.sample(&z0, &f)?;
    c.push("left_inverse/one_slot", li::verify_left_inverse(&big, &small, &op.to_first_order())?.max_residual, 1e-10);
    Ok(())
}

/// Fourth-order Laplacian of `f` at `x`.
fn fd_laplacian(f: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..x.len() {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h;
            f(&y)
        };
        acc += (-at(2.0)? + 16.0 * at(1.0)? - 30.0 * at(0.0)? + 16.0 * at(-1.0)? - at(-2.0)?) / (12.0 * h * h);
    }
    Ok(acc)
}

fn shell_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let r = rng.gen_range(lo..hi);
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a * r / s).collect()
}

fn laplace_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    for n in [2, 3, 4] {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = shell_point(rng, n, 0.5, 2.0);
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(fd_laplacian(&|y| fs::laplace_psi(n, y), &x, 1e-3)?.abs() * r.powi(n as i32));
        }
        c.push(format!("harmonic/n{n}"), worst, 1e-6);
    }
    c.push("unit_sphere_value/n3", (fs::laplace_psi(3, &[0.0, 0.6, 0.8])? + 1.0 / (4.0 * PI)).abs(), 1e-12);
    for n in [4, 5] {
        let cal = fs::laplace_calibration(n)?;
        c.push(format!("delta/n{n}/standard"), (cal.standard_delta - 1.0).abs(), 1e-2);
        c.push(format!("delta/n{n}/written_reported"), (cal.written_delta * (n - 2) as f64 - 1.0).abs(), 1e-2);
    }
    Ok(())
}

fn hyperbolic_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let (mut conj, mut limit) = (0.0f64, 0.0f64);
    for (p, q) in [(1, 1), (2, 1), (1, 3)] {
        let n = p + q;
        let scale = if n == 2 {
            fs::HYPERBOLIC_LOG_CONSTANT
        } else {
            -quadrature::gamma_half(n as f64 / 2.0 - 1.0) / (4.0 * PI.powf(n as f64 / 2.0))
        };
        for _ in 0..20 {
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let pv = fs::quadratic_form(p, &z);
            if pv.abs() < 1e-3 {
                continue;
            }
            let a = fs::hyperbolic_psi(p, q, 1, &z)?;
            conj = conj.max(a.max_abs_diff(&fs::hyperbolic_psi(p, q, -1, &z)?.conj_i()));
            let (re, im) = fs::boundary_power(pv, 1.0 - n as f64 / 2.0, 1.0, n == 2);
            let ph = PI * q as f64 / 2.0;
            let want = Ccd::scalar(0, scale * (ph.cos() * re - ph.sin() * im), scale * (ph.cos() * im + ph.sin() * re));
            limit = limit.max(a.max_abs_diff(&want) / want.norm().max(scale.abs()));
        }
    }
    c.push("branches_conjugate", conj, 1e-10);
    c.push("regularized_limit", limit, 1e-6);
    Ok(())
}

fn heat_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let (x, w) = quadrature::gauss_hermite(24);
    let (a, t): (f64, f64) = (1.3, 0.7);
    let s = 2.0 * a * t.sqrt();
    let mut mass = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            let e = fs::heat_kernel(2, a, t, &[s * x[i], s * x[j]])?;
            mass += w[i] * w[j] * e * (x[i] * x[i] + x[j] * x[j]).exp() * s * s;
        }
    }
    c.push("unit_mass/m2", (mass - 1.0).abs(), 1e-8);
    let mut worst = 0.0f64;
    for m in 1..=3 {
        for _ in 0..10 {
            let t = rng.gen_range(0.5..2.0);
            let x = shell_point(rng, m, 0.0, 3.0);
            let h = 1e-3;
            let ft = |d: f64| fs::heat_kernel(m, a, t + d, &x);
            let dt = (ft(-2.0 * h)? - 8.0 * ft(-h)? + 8.0 * ft(h)? - ft(2.0 * h)?) / (12.0 * h);
            let lap = fd_laplacian(&|y| fs::heat_kernel(m, a, t, y), &x, h)?;
            worst = worst.max((dt - a * a * lap).abs() / (dt.abs() + a * a * lap.abs()).max(1e-300));
        }
    }
    c.push("pde_residual", worst, 1e-6);
    Ok(())
}

fn wave_suite(c: &mut Cases) -> Result<()> {
    let r = 1.5;
    let bump = |s: f64| -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let u = 1.0 - s;
        let b = (-1.0 / u).exp();
        (b, -b / (u * u), b * (1.0 / u.powi(4) - 2.0 / u.powi(3)))
    };
    let boxed = |t: f64, x: [f64; 3]| {
        let rho2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let (_, b1, b2) = bump((t * t + rho2) / (r * r));
        4.0 * b2 * (t * t - rho2) / r.powi(4) - 4.0 * b1 / (r * r)
    };
    let phi0 = (-1.0f64).exp();
    c.push("box_test", (fs::wave3d_apply(&boxed, r)? - phi0).abs() / phi0, 1e-2);
    Ok(())
}

fn helmholtz_suite(c: &mut Cases, rng: &mut ChaCha8Rng) -> Result<()> {
    let k = 1.7;
    for n in [2, 3] {
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let x = shell_point(rng, n, 0.5, 2.0);
            for b in [1, -1] {
                for part in 0..2 {
                    let f = |y: &[f64]| -> Result<f64> {
                        let (re, im) = fs::helmholtz_psi(n, k, b, y)?.scalar_part();
                        Ok(if part == 0 { re } else { im })
                    };
                    worst = worst.max((fd_laplacian(&f, &x, 1e-3)? + k * k * f(&x)?).abs());
                }
            }
        }
        c.push(format!("residual/n{n}"), worst, 1e-5);
    }
    let mut wr = 0.0f64;
    let mut z = 0.05;
    while z < 80.0 {
        let w = fs::bessel::j1(z) * fs::bessel::y0(z) - fs::bessel::j0(z) * fs::bessel::y1(z);
        wr = wr.max((w * PI * z / 2.0 - 1.0).abs());
        z *= 1.3;
    }
    c.push("bessel_wronskian", wr, 1e-9);
    Ok(())
}

fn klein_gordon_suite(c: &mut Cases) -> Result<()> {
    let g = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
    let coarse = GridSpec::new(vec![32, 32], vec![-8.0, -8.0], vec![0.5, 0.5])?;
    let fine = GridSpec::new(vec![128, 128], vec![-8.0, -8.0], vec![0.125, 0.125])?;
    let rhs = coarse.sample(|x| Ok(Ccd::scalar(0, g(x), 0.0)))?;
    let us = fs::klein_gordon_solve_spectral(1, 1.0, 1, fs::KG_EPSILON, &rhs)?;
    let uf = fs::klein_gordon_solve_fd(1.0, 1, fs::KG_EPSILON, &fine, &g)?;
    let (mut diff, mut top) = (0.0f64, 0.0f64);
    for i in 0..32 {
        for j in 0..32 {
            let a = &us.values[i * 32 + j];
            diff = diff.max(a.max_abs_diff(&uf.values[4 * i * 128 + 4 * j]));
            top = top.max(a.norm());
        }
    }
    c.push("spectral_vs_grid_1p1", diff / top, 1e-2);
    Ok(())
}

fn convolution_suite(c: &mut Cases) -> Result<()> {
    let spec = GridSpec::centered(2, 30, 0.1)?;
    let slice = |t: f64| spec.sample(|x| Ok(Ccd::scalar(0, fs::heat_kernel(2, 1.0, t, x)?, 0.0)));
    let (k1, k2, want) = (slice(0.2)?, slice(0.3)?, slice(0.5)?);
    let got = fs::convolve_solve(Kernel::Grid(&k1), &k2)?.field;
    let top = want.values.iter().map(Ccd::norm).fold(0.0, f64::max);
    let err = got.values.iter().zip(&want.values).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
    c.push("heat_semigroup", err / top, 1e-2);
    for n in 1..=3 {
        c.push(format!("mollifier_mass/n{n}"), (fs::mollified_delta(0.3, n)?.mass() - 1.0).abs(), 1e-8);
    }
    Ok(())
}
