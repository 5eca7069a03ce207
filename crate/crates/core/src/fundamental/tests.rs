use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bessel::*;
use super::quadrature::{gauss_hermite, gauss_legendre};
use super::*;
use crate::algebra::{Ccd, CdNumber};
use crate::error::Error;
use crate::expr::Expr;
use crate::factorize::{CoeffTerm, HyperOp, HyperTerm};

const ZS: [f64; 10] = [0.1, 1.0, 2.5, 5.0, 7.5, 9.0, 10.5, 13.0, 20.0, 50.0];

#[rustfmt::skip]
const REFERENCE: [(BesselKind, u32, [f64; 10]); 8] = [
    (BesselKind::J, 0, [0.99750156206604, 0.7651976865579666, -0.048383776468198, -0.1775967713143383, 0.2663396578803784, -0.09033361118287614, -0.23664819446234714, 0.20692610237706782, 0.16702466434058316, 0.055812327669251816]),
    (BesselKind::J, 1, [0.049937526036242, 0.4400505857449335, 0.49709410246427405, -0.32757913759146523, 0.1352484275797055, 0.24531178657332528, -0.07885001422733148, -0.07031805212177837, 0.06683312417585005, -0.09751182812517514]),
    (BesselKind::Y, 0, [-1.5342386513503667, 0.08825696421567696, 0.4980703596152319, -0.30851762524903376, 0.11731328614820863, 0.24993669828502468, -0.0675303724978764, -0.07820786452787591, 0.06264059680938383, -0.09806499547007708]),
    (BesselKind::Y, 1, [-6.4589510947020266, -0.7812128213002887, 0.1459181379667858, 0.14786314339122683, -0.25912851048611624, 0.10431457519671589, 0.2337042283572686, -0.2100814084206935, -0.1655116143625213, -0.05679566856201477]),
    (BesselKind::I, 0, [1.0025015629340956, 1.2660658777520084, 3.289839144050123, 27.239871823604446, 268.16131151518937, 1093.5883545113747, 4527.441714638888, 49444.489582217575, 43558282.559553534, 2.9325537838493362e+20]),
    (BesselKind::I, 1, [0.050062526047092694, 0.565159103992485, 2.5167162452886984, 24.335642142450528, 249.58436542268814, 1030.9147225169565, 4306.134875096274, 47502.98735899586, 42454973.38512777, 2.903078590103557e+20]),
    (BesselKind::K, 0, [2.4270690247020164, 0.42102443824070834, 0.06234755320036619, 0.0036910983340425942, 0.00024917761635611437, 5.0881312956459246e-05, 1.0529988143865325e-05, 7.784543861420496e-07, 5.741237815336525e-10, 3.4101677497894956e-23]),
    (BesselKind::K, 1, [9.853844780870606, 0.6019072301972346, 0.07389081634774707, 0.004044613445452165, 0.0002652973901252895, 5.363701637945195e-05, 1.1020472311353896e-05, 8.078588412202347e-07, 5.883057969557038e-10, 3.4441022267175555e-23]),
];

#[test]
fn bessel_matches_reference_values() {
    for (kind, order, vals) in REFERENCE {
        for (z, want) in ZS.iter().zip(vals) {
            let got = bessel(kind, order, *z).unwrap().scalar_part().0;
            let rel = ((got - want) / want).abs();
            assert!(rel < 1e-10, "{kind:?}{order}({z}) = {got}, want {want}, rel {rel:e}");
        }
    }
}

fn scalar(v: &Ccd) -> (f64, f64) {
    v.scalar_part()
}

/// Fourth-order second derivative along axis `k`.
fn d2(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * h;
        f(&y)
    };
    (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h)
}

fn d1(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * h;
        f(&y)
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let r = rng.gen_range(lo..hi);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a *= r / nv);
    v
}

#[test]
fn bessel_rejects_bad_arguments_and_starts_at_one() {
    assert!(matches!(bessel(BesselKind::J, 0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(bessel(BesselKind::K, 1, -2.0), Err(Error::Domain(_))));
    assert!(matches!(bessel(BesselKind::J, 2, 1.0), Err(Error::Domain(_))));
    assert!((j0(1e-9) - 1.0).abs() < 1e-15);
    assert_eq!("h2".parse::<BesselKind>().unwrap(), BesselKind::H2);
    assert!("Q".parse::<BesselKind>().is_err());
}

#[test]
fn hankel_kinds_combine_j_and_y() {
    for z in [0.3, 4.0, 15.0] {
        let h1 = bessel(BesselKind::H1, 0, z).unwrap();
        let h2 = bessel(BesselKind::H2, 1, z).unwrap();
        assert_eq!(scalar(&h1), (j0(z), y0(z)));
        assert_eq!(scalar(&h2), (j1(z), -y1(z)));
    }
}

#[test]
fn bessel_ode_residual() {
    for z in [1.0, 5.0, 20.0] {
        for f in [j0 as fn(f64) -> f64, y0] {
            let g = |x: &[f64]| f(x[0]);
            let (y, dy, ddy) = (f(z), d1(&g, &[z], 0, 1e-2), d2(&g, &[z], 0, 1e-2));
            let res = z * z * ddy + z * dy + z * z * y;
            assert!(res.abs() < 1e-8, "z = {z}: residual {res:e}");
        }
    }
}

#[test]
fn wronskians() {
    let mut z = 0.05;
    while z < 80.0 {
        let w = j0(z) * (-y1(z)) - (-j1(z)) * y0(z);
        let want = 2.0 / (PI * z);
        assert!(((w - want) / want).abs() < 1e-9, "J/Y Wronskian at {z}: {w} vs {want}");
        let wk = i0(z) * k1(z) + i1(z) * k0(z);
        assert!(((wk - 1.0 / z) * z).abs() < 1e-9, "I/K Wronskian at {z}: {wk}");
        z *= 1.17;
    }
}

#[test]
fn quadrature_rules() {
    let (x, w) = gauss_legendre(10);
    let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
    assert!((int - 2.0 / 19.0).abs() < 1e-14);
    let (x, w) = gauss_hermite(20);
    let m0: f64 = w.iter().sum();
    let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
    assert!((m0 - PI.sqrt()).abs() < 1e-13);
    assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-12);
    assert!((quadrature::gamma_half(3.5) - 15.0 / 8.0 * PI.sqrt()).abs() < 1e-14);
}

#[test]
fn laplace_values() {
    assert!((laplace_psi(3, &[0.6, 0.0, 0.8]).unwrap() + 1.0 / (4.0 * PI)).abs() < 1e-12);
    assert_eq!(laplace_psi(2, &[0.0, 1.0]).unwrap(), 0.0);
    assert!(matches!(laplace_psi(3, &[0.0; 3]), Err(Error::Singular(_))));
    assert!(matches!(laplace_psi(1, &[1.0]), Err(Error::Domain(_))));
    assert!((sigma_written(3) - 4.0 * PI).abs() < 1e-12 && (sphere_area(3) - 4.0 * PI).abs() < 1e-12);
}

#[test]
fn laplace_constant_is_calibrated_by_the_delta_test() {
    let c = laplace_calibration(4).unwrap();
    assert!((c.standard_delta - 1.0).abs() < 0.01, "{c:?}");
    assert!((c.written_delta - 0.5).abs() < 0.01, "{c:?}");
    assert_eq!(c.chosen, c.standard);
    assert!((laplace_constant(4).unwrap() + 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
    for n in 5..=MAX_LAPLACE_DIMENSION {
        let c = laplace_calibration(n).unwrap();
        assert!((c.standard_delta - 1.0).abs() < 0.01 && c.chosen == c.standard, "{c:?}");
    }
    assert!(laplace_calibration(MAX_LAPLACE_DIMENSION + 1).is_err());
}

#[test]
fn laplace_is_harmonic_off_the_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 3, 4] {
        for _ in 0..40 {
            let z = random_point(&mut rng, n, 0.5, 2.0);
            let f = |x: &[f64]| laplace_psi(n, x).unwrap();
            let lap: f64 = (0..n).map(|k| d2(&f, &z, k, 1e-3)).sum();
            let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(lap.abs() < 1e-6 * r.powi(-(n as i32)), "n = {n}, |z| = {r}: {lap:e}");
        }
    }
}

fn gaussian3(s: f64) -> (impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> f64) {
    let phi = move |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp();
    let lap = move |x: &[f64]| {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        (r2 / s.powi(4) - 3.0 / (s * s)) * (-r2 / (2.0 * s * s)).exp()
    };
    (phi, lap)
}

/// `∫ Ψ_3 Δφ` on an odd grid with the singular cell replaced by its mean.
fn laplace3_delta(nodes: usize) -> f64 {
    let sol = FundamentalSolution::new(Kind::Laplace { n: 3 }).unwrap();
    let half = 2.75;
    let spec = GridSpec::cube(3, nodes, -half, half).unwrap();
    let psi = sample_kernel(&sol, &spec).unwrap();
    let (_, lap) = gaussian3(0.5);
    let h3 = spec.spacing.iter().product::<f64>();
    (0..spec.len()).map(|i| psi.values[i].scalar_part().0 * lap(&spec.point(i)) * h3).sum()
}

#[test]
fn laplace3_delta_test_and_refinement() {
    let coarse = laplace3_delta(33);
    let fine = laplace3_delta(65);
    assert!((fine - 1.0).abs() < 0.01, "65^3 grid: {fine}");
    assert!((coarse - 1.0).abs() / (fine - 1.0).abs() >= 1.5, "coarse {coarse}, fine {fine}");
}

#[test]
fn hyperbolic_examples_and_branches() {
    // ln 1 = 0, up to the extrapolation residual
    let v = hyperbolic_psi(1, 1, 1, &[1.0, 0.0]).unwrap();
    assert!(v.norm() < 1e-8, "{v:?}");
    assert!(matches!(hyperbolic_psi(1, 1, 1, &[1.0, 1.0]), Err(Error::Singular(_))));
    assert!(matches!(hyperbolic_psi(1, 1, 2, &[1.0, 0.5]), Err(Error::Domain(_))));
    // p = 1, q = 3: both sides of the cone are purely imaginary with opposite signs
    let a = scalar(&hyperbolic_psi(1, 3, 1, &[2.0, 1.0, 0.0, 0.0]).unwrap());
    let b = scalar(&hyperbolic_psi(1, 3, 1, &[1.0, 2.0, 0.0, 0.0]).unwrap());
    assert!(a.0.abs() < 1e-7 * a.1.abs() && b.0.abs() < 1e-7 * b.1.abs(), "{a:?} {b:?}");
    assert!((a.1 / b.1 + 1.0).abs() < 1e-7, "{a:?} {b:?}");
}

#[test]
fn hyperbolic_regularized_limit_matches_boundary_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (p, q) in [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3)] {
        for _ in 0..50 {
            let z: Vec<f64> = (0..p + q).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let pv = quadratic_form(p, &z);
            if pv.abs() < 1e-3 {
                continue;
            }
            let n = p + q;
            let (re, im) = boundary_power(pv, 1.0 - n as f64 / 2.0, 1.0, n == 2);
            let scale = if n == 2 {
                HYPERBOLIC_LOG_CONSTANT
            } else {
                -quadrature::gamma_half(n as f64 / 2.0 - 1.0) / (4.0 * PI.powf(n as f64 / 2.0))
            };
            let ph = PI * q as f64 / 2.0;
            let want = (scale * (ph.cos() * re - ph.sin() * im), scale * (ph.cos() * im + ph.sin() * re));
            let got = scalar(&hyperbolic_psi(p, q, 1, &z).unwrap());
            let err = ((got.0 - want.0).powi(2) + (got.1 - want.1).powi(2)).sqrt();
            let mag = (want.0.powi(2) + want.1.powi(2)).sqrt().max(scale.abs());
            assert!(err < 1e-6 * mag, "p={p} q={q} z={z:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn hyperbolic_branches_are_conjugate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (p, q) in [(1, 1), (2, 1), (1, 3), (3, 2)] {
        for _ in 0..100 {
            let z: Vec<f64> = (0..p + q).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (Ok(a), Ok(b)) = (hyperbolic_psi(p, q, 1, &z), hyperbolic_psi(p, q, -1, &z)) else {
                continue;
            };
            assert!(a.max_abs_diff(&b.conj_i()) < 1e-10);
        }
    }
}

/// Compact bump `exp(−1/(1−s))`, `s = |y|²/R²`, with `B'` and `B''` in `s`.
fn bump(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - s;
    let b = (-1.0 / u).exp();
    (b, -b / (u * u), b * (1.0 / u.powi(4) - 2.0 / u.powi(3)))
}

fn hyperbolic_delta(cells: usize) -> (f64, f64) {
    let r = 1.0;
    let h = 2.0 * r / cells as f64;
    let mut acc = (0.0, 0.0);
    for i in 0..cells {
        for j in 0..cells {
            // shifted midpoints never land on the diagonals
            let x = -r + (i as f64 + 0.5) * h;
            let y = -r + (j as f64 + 0.3) * h;
            let (_, _, bpp) = bump((x * x + y * y) / (r * r));
            let lphi = 4.0 * bpp * (x * x - y * y) / r.powi(4);
            if lphi == 0.0 {
                continue;
            }
            let (a, b) = scalar(&hyperbolic_psi(1, 1, 1, &[x, y]).unwrap());
            acc.0 += a * lphi * h * h;
            acc.1 += b * lphi * h * h;
        }
    }
    acc
}

#[test]
fn hyperbolic_delta_test() {
    let phi0 = (-1.0f64).exp();
    let (re, im) = hyperbolic_delta(800);
    assert!((re - phi0).abs() < 0.02 * phi0, "{re} vs {phi0}");
    assert!(im.abs() < 0.02 * phi0, "imaginary part {im}");
}

#[test]
fn heat_kernel_examples() {
    assert_eq!(heat_kernel(2, 1.0, -1.0, &[0.1, 0.2]).unwrap(), 0.0);
    assert!((heat_kernel(1, 1.0, 1.0, &[0.0]).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-15);
    assert!(heat_kernel(1, 0.0, 1.0, &[0.0]).is_err());
}

#[test]
fn heat_kernel_unit_mass_by_gauss_hermite() {
    let (a, t) = (1.3, 0.7);
    let (x, w) = gauss_hermite(24);
    let s = 2.0 * a * f64::sqrt(t);
    let mut mass = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            for k in 0..x.len() {
                let u2 = x[i] * x[i] + x[j] * x[j] + x[k] * x[k];
                let e = heat_kernel(3, a, t, &[s * x[i], s * x[j], s * x[k]]).unwrap();
                mass += w[i] * w[j] * w[k] * e * u2.exp() * s.powi(3);
            }
        }
    }
    assert!((mass - 1.0).abs() < 1e-8, "{mass}");
}

#[test]
fn heat_kernel_pde_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in 1..=3 {
        let a = 0.8;
        for _ in 0..30 {
            let t = rng.gen_range(0.5..2.0);
            let x = random_point(&mut rng, m, 0.0, 3.0);
            let mut z = vec![t];
            z.extend(&x);
            let f = |z: &[f64]| heat_kernel(m, a, z[0], &z[1..]).unwrap();
            let dt = d1(&f, &z, 0, 1e-3);
            let lap: f64 = (1..=m).map(|k| d2(&f, &z, k, 1e-3)).sum();
            let res = dt - a * a * lap;
            assert!(res.abs() < 1e-6 * (dt.abs() + a * a * lap.abs()).max(1e-300), "m={m} z={z:?}: {res:e}");
        }
    }
}

#[test]
fn wave_zero_and_radial_reduction() {
    assert_eq!(wave3d_apply(&|_, _| 0.0, 1.0).unwrap(), 0.0);
    let w: f64 = sphere_rule().iter().map(|p| p.1).sum();
    assert!((w - 4.0 * PI).abs() < 1e-12);
    // φ = g(t) h(|x|) gives ∫_0^R t g(t) h(t) dt
    let g = |t: f64| (-(t - 0.4) * (t - 0.4) * 8.0).exp() * bump(t * t / 4.0).0;
    let hr = |r: f64| 1.0 / (1.0 + r * r);
    let got = wave3d_apply(&|t, x| g(t) * hr((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()), 2.0).unwrap();
    let (u, wq) = gauss_legendre(80);
    let want: f64 = u
        .iter()
        .zip(&wq)
        .map(|(u, w)| {
            let t = 1.0 + u;
            w * t * g(t) * hr(t)
        })
        .sum();
    assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
}

/// `□φ` for `φ = B((t² + |x|²)/R²)`.
fn box_bump(t: f64, x: [f64; 3], r: f64) -> f64 {
    let rho2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let (_, b1, b2) = bump((t * t + rho2) / (r * r));
    4.0 * b2 * (t * t - rho2) / r.powi(4) - 4.0 * b1 / (r * r)
}

#[test]
fn wave_box_test() {
    let r = 1.5;
    let v = wave3d_apply(&|t, x| box_bump(t, x, r), r).unwrap();
    let phi0 = (-1.0f64).exp();
    assert!((v - phi0).abs() < 0.01 * phi0, "{v} vs {phi0}");
}

#[test]
fn helmholtz_examples() {
    let v = scalar(&helmholtz_psi(3, 2.0, 1, &[0.0, 1.0, 0.0]).unwrap());
    assert!((v.0 + 2f64.cos() / (4.0 * PI)).abs() < 1e-15 && (v.1 + 2f64.sin() / (4.0 * PI)).abs() < 1e-15);
    let v = scalar(&helmholtz_psi(3, 1e-9, 1, &[1.0, 0.0, 0.0]).unwrap());
    assert!((v.0 + 1.0 / (4.0 * PI)).abs() < 1e-12);
    assert!(matches!(helmholtz_psi(2, 1.0, 1, &[0.0, 0.0]), Err(Error::Singular(_))));
    assert!(matches!(helmholtz_psi(2, 0.0, 1, &[1.0, 0.0]), Err(Error::Domain(_))));
    let a = helmholtz_psi(2, 1.5, 1, &[0.3, 0.4]).unwrap();
    let b = helmholtz_psi(2, 1.5, -1, &[0.3, 0.4]).unwrap();
    assert!(a.max_abs_diff(&b.conj_i()) == 0.0);
}

#[test]
fn helmholtz_fd_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 3] {
        for b in [1, -1] {
            let c = 1.7;
            for _ in 0..30 {
                let x = random_point(&mut rng, n, 0.5, 2.0);
                for part in 0..2 {
                    let f = |y: &[f64]| {
                        let v = scalar(&helmholtz_psi(n, c, b, y).unwrap());
                        if part == 0 {
                            v.0
                        } else {
                            v.1
                        }
                    };
                    let lap: f64 = (0..n).map(|k| d2(&f, &x, k, 1e-3)).sum();
                    let res = lap + c * c * f(&x);
                    assert!(res.abs() < 1e-5, "n={n} b={b} x={x:?}: {res:e}");
                }
            }
        }
    }
}

#[test]
fn klein_gordon_symbol() {
    let v = scalar(&klein_gordon_fourier(1, 1.0, 1, KG_EPSILON, &[0.0, 0.0]).unwrap());
    assert!((v.0 - 1.0).abs() < KG_EPSILON && v.1.abs() < KG_EPSILON);
    let shell = klein_gordon_fourier(1, 1.0, -1, KG_EPSILON, &[1.25, 0.75]).unwrap();
    assert!((shell.norm() - 1.0 / KG_EPSILON).abs() < 1e-9);
    let sol = FundamentalSolution::parse("klein_gordon:p=1,q=1,c=1").unwrap();
    assert!(sol.eval(&[0.1, 0.2]).is_err());
    assert_eq!(sol.symbol(&[0.0, 0.0]).unwrap(), klein_gordon_fourier(1, 1.0, 1, KG_EPSILON, &[0.0, 0.0]).unwrap());
}

#[test]
fn klein_gordon_spectral_matches_grid_solver() {
    let g = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
    let coarse = GridSpec::new(vec![64, 64], vec![-8.0, -8.0], vec![0.25, 0.25]).unwrap();
    let fine = GridSpec::new(vec![256, 256], vec![-8.0, -8.0], vec![0.0625, 0.0625]).unwrap();
    let rhs = coarse.sample(|x| Ok(Ccd::scalar(0, g(x), 0.0))).unwrap();
    let us = klein_gordon_solve_spectral(1, 1.0, 1, KG_EPSILON, &rhs).unwrap();
    let uf = klein_gordon_solve_fd(1.0, 1, KG_EPSILON, &fine, &g).unwrap();
    let mut diff = 0.0f64;
    let mut top = 0.0f64;
    for i in 0..64 {
        for j in 0..64 {
            let a = &us.values[i * 64 + j];
            let b = &uf.values[4 * i * 256 + 4 * j];
            diff = diff.max(a.max_abs_diff(b));
            top = top.max(a.norm());
        }
    }
    assert!(diff < 0.01 * top, "max diff {diff:e}, max |u| {top:e}");
}

#[test]
fn mollifier_properties() {
    for n in 1..=3 {
        let m = mollified_delta(0.3, n).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-8, "n = {n}: {}", m.mass());
        assert!(m.apply(&|x| x[0]).abs() < 1e-12);
    }
    let phi = |x: &[f64]| (-(x[0] - 0.2).powi(2) - x[1] * x[1]).exp();
    let errs: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&e| (mollified_delta(e, 2).unwrap().apply(&phi) - phi(&[0.0, 0.0])).abs())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(mollified_delta(0.0, 2).is_err());
    let grid = mollified_delta(0.5, 2).unwrap().sample(&GridSpec::cube(2, 5, -1.0, 1.0).unwrap()).unwrap();
    assert_eq!(grid.len(), 25);
}

fn heat_slice(t: f64, spec: &GridSpec) -> GridField {
    spec.sample(|x| Ok(Ccd::scalar(0, heat_kernel(x.len(), 1.0, t, x)?, 0.0))).unwrap()
}

#[test]
fn convolution_with_a_discrete_delta_sifts() {
    let spec = GridSpec::centered(2, 20, 0.1).unwrap();
    let k = heat_slice(0.3, &spec);
    let mut delta =
        GridField::new(spec.shape.clone(), spec.origin.clone(), spec.spacing.clone(), vec![Ccd::zero(0); spec.len()])
            .unwrap();
    let centre = delta.flat_index(&[20, 20]);
    delta.values[centre] = Ccd::scalar(0, 1.0 / delta.cell_volume(), 0.0);
    let out = convolve_solve(Kernel::Grid(&k), &delta).unwrap();
    assert!(out.field.values.iter().zip(&k.values).all(|(a, b)| a.max_abs_diff(b) < 1e-14));
    let iterated = iterated_convolution(&[&k, &delta]).unwrap();
    assert!(iterated.values.iter().zip(&k.values).all(|(a, b)| a.max_abs_diff(b) < 1e-14));
}

#[test]
fn heat_semigroup_by_convolution() {
    let spec = GridSpec::centered(2, 40, 0.1).unwrap();
    let (k1, k2) = (heat_slice(0.2, &spec), heat_slice(0.35, &spec));
    let want = heat_slice(0.55, &spec);
    let got = iterated_convolution(&[&k1, &k2]).unwrap();
    let top = want.values.iter().map(Ccd::norm).fold(0.0, f64::max);
    let err = got.values.iter().zip(&want.values).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
    assert!(err < 0.01 * top, "{err:e} vs {top:e}");
    let direct = convolve_solve(Kernel::Grid(&k1), &k2).unwrap();
    assert!(direct.report.blocked);
    assert_eq!(direct.field, got);
}

fn erf(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = x;
    for n in 0..200 {
        let t = term / (2 * n + 1) as f64;
        sum += t;
        if t.abs() < 1e-18 {
            break;
        }
        term *= -x * x / (n + 1) as f64;
    }
    2.0 / PI.sqrt() * sum
}

#[test]
fn poisson_gaussian_source() {
    let s = 0.3;
    let sol = FundamentalSolution::new(Kind::Laplace { n: 3 }).unwrap();
    let src = GridSpec::centered(3, 15, 0.1).unwrap();
    let rho = src
        .sample(|x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Ok(Ccd::scalar(0, (2.0 * PI * s * s).powf(-1.5) * (-r2 / (2.0 * s * s)).exp(), 0.0))
        })
        .unwrap();
    let out = GridSpec::centered(3, 6, 0.1).unwrap();
    let u = convolve_on(Kernel::Solution(&sol), &rho, &out).unwrap();
    assert_eq!(u.report.averaged, out.len());
    for i in 0..out.len() {
        let x = out.point(i);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let want =
            if r == 0.0 { -(2.0 / PI).sqrt() / (4.0 * PI * s) } else { -erf(r / (2f64.sqrt() * s)) / (4.0 * PI * r) };
        let got = u.field.values[i].scalar_part().0;
        assert!((got - want).abs() < 0.005 * want.abs(), "r = {r}: {got} vs {want}");
    }
}

#[test]
fn convolution_alignment_errors() {
    let a = GridField::cube(2, 5, 0.0, 1.0, |_| Ok(Ccd::scalar(0, 1.0, 0.0))).unwrap();
    let b = GridField::cube(2, 5, 0.0, 2.0, |_| Ok(Ccd::scalar(0, 1.0, 0.0))).unwrap();
    assert!(matches!(convolve_solve(Kernel::Grid(&a), &b), Err(Error::Alignment(_))));
    let c = GridField::cube(3, 5, 0.0, 1.0, |_| Ok(Ccd::scalar(0, 1.0, 0.0))).unwrap();
    assert!(matches!(convolve_solve(Kernel::Grid(&a), &c), Err(Error::Alignment(_))));
    let sol = FundamentalSolution::new(Kind::Laplace { n: 3 }).unwrap();
    assert!(matches!(convolve_solve(Kernel::Solution(&sol), &a), Err(Error::Alignment(_))));
    assert!(iterated_convolution(&[&a]).is_err());
}

#[test]
fn zeroed_singular_cells_are_reported() {
    let sol = FundamentalSolution::new(Kind::Laplace { n: 2 }).unwrap();
    let spec = GridSpec::centered(2, 4, 0.25).unwrap();
    let g = spec.sample(|_| Ok(Ccd::scalar(0, 1.0, 0.0))).unwrap();
    let out = convolve_solve(Kernel::Solution(&sol), &g).unwrap();
    assert_eq!(out.report.zeroed, spec.len());
    assert!(out.report.zeroed_bound > 0.0);
    assert!(!out.report.blocked);
}

fn unit(level: u32, k: usize) -> Ccd {
    Ccd::from_real(CdNumber::basis(level, k))
}

fn first_order(level: u32, coeffs: Vec<Ccd>) -> HyperOp {
    let n = coeffs.len();
    HyperOp {
        dimension: n,
        level,
        terms: coeffs
            .into_iter()
            .enumerate()
            .map(|(j, u)| {
                let mut alpha = vec![0; n];
                alpha[j] = 1;
                HyperTerm { alpha, coeff: vec![CoeffTerm { scalar: Expr::num(1.0), unit: u }] }
            })
            .collect(),
        zero_order: Vec::new(),
    }
}

#[test]
fn first_order_kernel_matches_the_ode_green_function() {
    let beta = 1.3;
    let spec = GridSpec::centered(1, 200, 0.01).unwrap();
    let psi =
        spec.sample(|x| Ok(Ccd::scalar(0, if x[0] > 0.0 { x[0] * (-beta * x[0]).exp() } else { 0.0 }, 0.0))).unwrap();
    let op = first_order(0, vec![Ccd::scalar(0, 1.0, 0.0)]);
    let e = first_order_fundamental(&psi, &op, &Ccd::scalar(0, beta, 0.0)).unwrap();
    assert_eq!(e.len(), 397);
    for i in 0..e.len() {
        let x = e.point(i)[0];
        if x.abs() < 0.025 {
            continue;
        }
        let want = if x > 0.0 { (-beta * x).exp() } else { 0.0 };
        assert!((e.values[i].scalar_part().0 - want).abs() < 1e-8, "x = {x}");
    }
    let thin = GridSpec::centered(1, 1, 0.1).unwrap().sample(|_| Ok(Ccd::scalar(0, 1.0, 0.0))).unwrap();
    assert!(matches!(first_order_fundamental(&thin, &op, &Ccd::zero(0)), Err(Error::Stencil(_))));
}

/// `(−σ)Ψ_3` with `σ = Σ ∂_j i_j^*`, obtained as `σ^*Ψ_3`.
#[test]
fn gradient_kernel_sifts_against_derivatives() {
    let sol = FundamentalSolution::new(Kind::Laplace { n: 3 }).unwrap();
    let h = 0.06;
    let spec = GridSpec::centered(3, 42, h).unwrap();
    let psi = sample_kernel(&sol, &spec).unwrap();
    let op = first_order(2, (1..=3).map(|j| Ccd::from_real(CdNumber::basis(2, j).conj())).collect());
    let e = first_order_fundamental(&psi, &op, &Ccd::zero(2)).unwrap();
    let s = 0.5;
    let mut acc = Ccd::zero(2);
    for i in 0..e.len() {
        let x = e.point(i);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let phi = (-r2 / (2.0 * s * s)).exp();
        for (j, &xj) in x.iter().enumerate() {
            let dphi = -xj / (s * s) * phi;
            acc += &e.values[i].mul(&unit(2, j + 1).conj_cd()).scale(-dphi * h * h * h);
        }
    }
    let (re, _) = acc.scalar_part();
    assert!((re - 1.0).abs() < 0.02, "{acc:?}");
    assert!((&acc - &Ccd::scalar(2, re, 0.0)).norm() < 0.02);
}

/// `((c−σ)Ψ) * ((c+σ)Ψ) = Ψ` for `Δ − κ²`, i.e. `c = 𝐢κ`.
#[test]
fn two_first_order_kernels_compose_to_the_second_order_kernel() {
    let kappa = 3.0;
    let h = 0.05;
    let spec = GridSpec::centered(3, 34, h).unwrap();
    let yukawa = |r: f64| -(-kappa * r).exp() / (4.0 * PI * r);
    let psi = spec
        .sample(|x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let v = if r == 0.0 { laplace3_cell_average(h) + kappa / (4.0 * PI) } else { yukawa(r) };
            Ok(Ccd::scalar(2, v, 0.0))
        })
        .unwrap();
    let c = Ccd::scalar(2, 0.0, kappa);
    let minus = first_order(2, (1..=3).map(|j| unit(2, j).conj_cd()).collect());
    let plus = first_order(2, (1..=3).map(|j| unit(2, j)).collect());
    let e1 = first_order_fundamental(&psi, &minus, &c).unwrap();
    let e2 = first_order_fundamental(&psi, &plus, &c).unwrap();
    for k in [6, 10, 14] {
        let out = GridSpec::new(vec![1, 1, 1], vec![k as f64 * h, 0.0, 0.0], vec![h; 3]).unwrap();
        let v = convolve_on(Kernel::Grid(&e1), &e2, &out).unwrap().field.values[0].clone();
        let want = yukawa(k as f64 * h);
        let (re, _) = v.scalar_part();
        assert!((re - want).abs() < 0.03 * want.abs(), "r = {}: {v:?} vs {want}", k as f64 * h);
        assert!((&v - &Ccd::scalar(2, re, 0.0)).norm() < 0.03 * want.abs());
    }
}

/// `Ψ_3 * Ψ_3` is a fundamental solution of `Δ²`. The second factor is
/// truncated to a box; the dropped part is harmonic there, so it is
/// invisible to `Δ²φ` as long as the first factor covers every offset.
#[test]
fn iterated_biharmonic_delta_test() {
    let sol = FundamentalSolution::new(Kind::Laplace { n: 3 }).unwrap();
    let h = 0.2;
    let wide = sample_kernel(&sol, &GridSpec::centered(3, 30, h).unwrap()).unwrap();
    let near = sample_kernel(&sol, &GridSpec::centered(3, 15, h).unwrap()).unwrap();
    let out = GridSpec::centered(3, 15, h).unwrap();
    let v = iterated_convolution_on(&[&wide, &near], &out).unwrap();
    let s = 0.6;
    let mut acc = 0.0;
    for i in 0..out.len() {
        let x = out.point(i);
        let u = x.iter().map(|a| a * a).sum::<f64>() / (s * s);
        let bih = (u * u - 10.0 * u + 15.0) / s.powi(4) * (-u / 2.0).exp();
        acc += v.values[i].scalar_part().0 * bih * h * h * h;
    }
    assert!((acc - 1.0).abs() < 0.03, "{acc}");
}

#[test]
fn grid_complex_text_round_trip() {
    let g = GridSpec::cube(2, 3, -1.0, 1.0)
        .unwrap()
        .sample(|x| Ok(Ccd::new(CdNumber::basis(1, 1).scale(x[0]), CdNumber::real(1, x[1]))))
        .unwrap();
    let text = g.to_text();
    assert!(text.lines().next().unwrap().ends_with("complex"));
    assert_eq!(GridField::from_text(&text).unwrap(), g);
}

#[test]
fn solution_parse_and_display() {
    for s in [
        "laplace:n=3",
        "hyperbolic:p=1,q=2,b=-1",
        "heat:m=2,a=0.5",
        "wave3d",
        "helmholtz:n=2,c=1.5,b=1",
        "klein_gordon:p=1,q=1,c=1,b=1",
    ] {
        assert_eq!(FundamentalSolution::parse(s).unwrap().to_string(), s);
    }
    assert!(matches!(FundamentalSolution::parse("laplace"), Err(Error::Spec(_))));
    assert!(matches!(FundamentalSolution::parse("laplace:n=x"), Err(Error::Parse { .. })));
    assert!(matches!(FundamentalSolution::parse("poisson:n=3"), Err(Error::Spec(_))));
    assert!(matches!(FundamentalSolution::parse("helmholtz:n=4,c=1"), Err(Error::Domain(_))));
    let w = FundamentalSolution::parse("wave3d").unwrap();
    assert!(w.eval(&[1.0, 0.0, 0.0, 1.0]).is_err());
    assert_eq!(w.singular_set(), "forward light cone t = |x| (measure supported there)");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_finite_off_their_singular_sets(x in proptest::collection::vec(-3.0f64..3.0, 3)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let mut t = x.clone();
        t[0] = t[0].abs() + 0.01;
        let cases = [
            ("laplace:n=3", x.clone()),
            ("helmholtz:n=3,c=2,b=-1", x.clone()),
            ("heat:m=2,a=1.1", t),
            ("hyperbolic:p=2,q=1", x.clone()),
        ];
        for (name, z) in cases {
            let sol = FundamentalSolution::parse(name).unwrap();
            match sol.eval(&z) {
                Ok(v) => {
                    prop_assert!(v.re.re().is_finite() && v.im.re().is_finite());
                    if sol.is_real() {
                        prop_assert_eq!(v.im.re(), 0.0);
                    }
                }
                Err(Error::Singular(_)) => prop_assert!(name.starts_with("hyperbolic")),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn laplace2_matches_the_log_form(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        prop_assume!(x * x + y * y > 1e-6);
        let v = laplace_psi(2, &[x, y]).unwrap();
        prop_assert!((v - (x * x + y * y).ln() / (4.0 * PI)).abs() < 1e-15);
    }
}
