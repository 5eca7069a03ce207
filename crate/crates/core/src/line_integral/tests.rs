use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::algebra::CdNumber;
use crate::error::Error;
use crate::expr::{parse, Expr};
use crate::fundamental::GridField;

// Independent doubling product used as the expansion oracle.
fn doubling(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![x[0] * y[0]];
    }
    let h = n / 2;
    let (xi, eta) = x.split_at(h);
    let (ga, de) = y.split_at(h);
    let conj = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(i, &c)| if i == 0 { c } else { -c }).collect() };
    let a = doubling(xi, ga);
    let b = doubling(&conj(de), eta);
    let c = doubling(de, xi);
    let d = doubling(eta, &conj(ga));
    let mut out = vec![0.0; n];
    for i in 0..h {
        out[i] = a[i] - b[i];
        out[h + i] = c[i] + d[i];
    }
    out
}

fn oracle_node(n: &Node, z: &[f64]) -> Vec<f64> {
    match n {
        Node::Const(c) => c.embed((z.len() as f64).log2() as u32).coeffs().to_vec(),
        Node::Pow(m) => {
            let mut acc = vec![0.0; z.len()];
            acc[0] = 1.0;
            for _ in 0..*m {
                acc = doubling(&acc, z);
            }
            acc
        }
        Node::Mul(a, b) => doubling(&oracle_node(a, z), &oracle_node(b, z)),
    }
}

fn oracle(p: &Phrase, z: &CdNumber) -> CdNumber {
    let mut acc = vec![0.0; z.dim()];
    for w in &p.words {
        for (a, b) in acc.iter_mut().zip(oracle_node(&w.tree, z.coeffs())) {
            *a += w.scale * b;
        }
    }
    CdNumber::from_coeffs(acc).unwrap()
}

fn random_cd(rng: &mut ChaCha8Rng, level: u32) -> CdNumber {
    CdNumber::from_coeffs((0..1 << level).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_tree(rng: &mut ChaCha8Rng, level: u32, leaves: usize) -> Node {
    if leaves == 1 {
        return if rng.gen_bool(0.5) { Node::Const(random_cd(rng, level)) } else { Node::Pow(rng.gen_range(0..3)) };
    }
    let left = rng.gen_range(1..leaves);
    Node::mul(random_tree(rng, level, left), random_tree(rng, level, leaves - left))
}

fn random_phrase(rng: &mut ChaCha8Rng, level: u32, words: usize) -> Phrase {
    Phrase::new(
        (0..words)
            .map(|_| {
                let leaves = rng.gen_range(1..5);
                Word { scale: rng.gen_range(-2.0..2.0), tree: random_tree(rng, level, leaves) }
            })
            .collect(),
    )
}

/// `Σ_k c_k z^k` with `c_k` in the quaternions (generators i1, i2, i3).
fn quaternion_polynomial(rng: &mut ChaCha8Rng, degree: u32) -> Phrase {
    Phrase::new(
        (0..=degree)
            .map(|k| Word { scale: 1.0, tree: Node::mul(Node::Const(random_cd(rng, 2)), Node::Pow(k)) })
            .collect(),
    )
}

fn fd_direction(p: &Phrase, z: &CdNumber, h: &CdNumber) -> CdNumber {
    let t = 1e-5;
    let at = |s: f64| p.eval(&(z + &h.scale(s)));
    (&(&(&at(-2.0 * t) - &at(2.0 * t)) + &at(t).scale(8.0)) - &at(-t).scale(8.0)).scale(1.0 / (12.0 * t))
}

fn cd(c: &[f64]) -> CdNumber {
    CdNumber::from_coeffs(c.to_vec()).unwrap()
}

#[test]
fn eval_examples() {
    let i1 = CdNumber::basis(1, 1);
    assert_eq!(parse_phrase("z").unwrap().eval(&i1), i1);
    let p = parse_phrase("(i1*z)*(i2*z)").unwrap();
    assert_eq!(p.eval(&CdNumber::one(0)).max_abs_diff(&CdNumber::basis(2, 3)), 0.0);
    // z^0 = 1
    assert_eq!(parse_phrase("z^0").unwrap().eval(&CdNumber::basis(3, 5)), CdNumber::one(3));
}

#[test]
fn bracketing_is_kept_in_octonions() {
    let z = cd(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let a = parse_phrase("(i1*i2)*z").unwrap().eval(&z);
    let b = parse_phrase("i1*(i2*z)").unwrap().eval(&z);
    assert!((&a + &b).norm() < 1e-15 && a.norm() > 0.5);
}

#[test]
fn random_octonion_phrases_match_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = random_phrase(&mut rng, 3, 3);
        let z = random_cd(&mut rng, 3);
        assert!(p.eval(&z).max_abs_diff(&oracle(&p, &z)) < 1e-12);
    }
}

#[test]
fn derivative_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_cd(&mut rng, 3);
    let one = CdNumber::one(3);
    let sq = parse_phrase("z^2").unwrap();
    assert!(sq.derivative_apply(&z, &one).max_abs_diff(&z.scale(2.0)) < 1e-15);
    let c = random_cd(&mut rng, 3);
    let h = random_cd(&mut rng, 3);
    let lin = Phrase::new(vec![Word { scale: 1.0, tree: Node::mul(Node::Const(c.clone()), Node::Pow(1)) }]);
    assert!(lin.derivative_apply(&z, &h).max_abs_diff(&c.mul(&h)) < 1e-15);
}

#[test]
fn derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for level in [3, 4] {
        for _ in 0..50 {
            let p = random_phrase(&mut rng, level, 3);
            let z = random_cd(&mut rng, level);
            let h = random_cd(&mut rng, level);
            let exact = p.derivative_apply(&z, &h);
            let fd = fd_direction(&p, &z, &h);
            assert!(exact.max_abs_diff(&fd) <= 1e-6 * (1.0 + exact.norm()), "{p}: {exact} vs {fd}");
        }
    }
}

#[test]
fn generator_increment_gives_partial_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_phrase(&mut rng, 3, 4);
    let z = random_cd(&mut rng, 3);
    for k in 0..8 {
        let ek = CdNumber::basis(3, k);
        let d = 1e-5;
        let at = |s: f64| {
            let mut y = z.clone();
            y[k] += s;
            p.eval(&y)
        };
        let partial =
            (&(&(&at(-2.0 * d) - &at(2.0 * d)) + &at(d).scale(8.0)) - &at(-d).scale(8.0)).scale(1.0 / (12.0 * d));
        assert!(p.derivative_apply(&z, &ek).max_abs_diff(&partial) < 1e-7);
    }
}

#[test]
fn left_antiderivative_inverts_the_real_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for level in [2, 3, 4] {
        for _ in 0..30 {
            let mu = random_phrase(&mut rng, level, 3);
            let kappa = mu.left_antiderivative();
            let z = random_cd(&mut rng, level);
            let d = kappa.derivative_apply(&z, &CdNumber::one(level));
            assert!(d.max_abs_diff(&mu.eval(&z)) < 1e-12 * (1.0 + d.norm()), "{mu} -> {kappa}");
        }
    }
}

#[test]
fn left_algorithm_raises_the_leftmost_power() {
    let kappa = parse_phrase("i1*z*i2*z").unwrap().left_antiderivative();
    let z = cd(&[0.3, -0.2, 0.5, 0.1]);
    let expected = &parse_phrase("i1*z^2*i2*z").unwrap().eval(&z).scale(0.5)
        - &parse_phrase("i1*z^3*i2").unwrap().eval(&z).scale(1.0 / 6.0);
    assert!(kappa.eval(&z).max_abs_diff(&expected) < 1e-15);
}

#[test]
fn phrase_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let p = random_phrase(&mut rng, 3, 3);
        let q = parse_phrase(&p.to_string()).unwrap();
        let z = random_cd(&mut rng, 3);
        assert!(p.eval(&z).max_abs_diff(&q.eval(&z)) < 1e-12, "{p} vs {q}");
    }
    let p = parse_phrase("-2*(i1*z)*(i2*z^2) + [0.5 + 0.25*i3]*z - 1.5e-1").unwrap();
    assert_eq!(p.words.len(), 3);
    assert_eq!(p.words[0].scale, -1.0);
    for bad in ["", "z +", "(z", "z^x", "[1+i1", "q"] {
        assert!(matches!(parse_phrase(bad), Err(Error::Parse { .. })), "{bad}");
    }
}

#[test]
fn variation_examples() {
    let l = |c: &[f64]| cd(c);
    assert_eq!(Path::segment(l(&[0.0, 0.0]), l(&[1.0, 0.0])).variation(), 1.0);
    let square =
        Path::new(vec![l(&[0.0, 0.0]), l(&[1.0, 0.0]), l(&[1.0, 1.0]), l(&[0.0, 1.0]), l(&[0.0, 0.0])]).unwrap();
    assert_eq!(square.variation(), 4.0);
    assert!(Path::new(vec![l(&[0.0])]).is_err());
}

#[test]
fn path_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = Path::new((0..5).map(|_| random_cd(&mut rng, 2)).collect()).unwrap();
    assert_eq!(Path::from_csv(&p.to_csv()).unwrap(), p);
    assert!(Path::from_csv("1,2\n1,2,3,4\n").is_err());
    assert!(Path::from_csv("1,2,3\n1,2,3\n").is_err());
}

#[test]
fn grid_text_round_trip() {
    let g = GridField::cube(2, 3, -1.0, 1.0, |x| Ok(cd(&[x[0], x[1], x[0] * x[1], 1.0]))).unwrap();
    assert_eq!(GridField::from_text(&g.to_text()).unwrap(), g);
    assert!(GridField::from_text("2 3 3 0 0 1 1\n1,2\n").is_err());
}

#[test]
fn integrate_constant_and_complex_examples() {
    let opts = LineOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (a, b) = (random_cd(&mut rng, 3), random_cd(&mut rng, 3));
    let one = parse_phrase("1").unwrap();
    let v = line_integrate(&one, &Path::segment(a.clone(), b.clone()), None, &opts).unwrap();
    assert!(v.max_abs_diff(&(&b - &a)) < 1e-12);
    let z = parse_phrase("z").unwrap();
    let v = line_integrate(&z, &Path::segment(CdNumber::zero(1), CdNumber::basis(1, 1)), None, &opts).unwrap();
    assert!(v.max_abs_diff(&CdNumber::real(1, -0.5)) < 1e-12);
}

#[test]
fn integral_matches_kappa_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for level in [3, 4] {
        let mu = random_phrase(&mut rng, level, 2);
        let path = Path::new((0..4).map(|_| random_cd(&mut rng, level).scale(0.5)).collect()).unwrap();
        let v = line_integrate(&mu, &path, None, &LineOptions::default()).unwrap();
        let kappa = mu.left_antiderivative();
        let exact = &kappa.eval(path.end()) - &kappa.eval(path.start());
        assert!(v.max_abs_diff(&exact) < 1e-9 * (1.0 + exact.norm()));
    }
}

#[test]
fn homotopic_paths_agree_in_quaternions() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mu = quaternion_polynomial(&mut rng, 3);
    let (a, b) = (random_cd(&mut rng, 2).scale(0.4), random_cd(&mut rng, 2).scale(0.4));
    let p1 = Path::segment(a.clone(), b.clone());
    let p2 = Path::new(vec![a, random_cd(&mut rng, 2).scale(0.4), random_cd(&mut rng, 2).scale(0.4), b]).unwrap();
    let opts = LineOptions::default();
    let v1 = line_integrate(&mu, &p1, None, &opts).unwrap();
    let v2 = line_integrate(&mu, &p2, None, &opts).unwrap();
    assert!(v1.max_abs_diff(&v2) < 1e-8);
}

#[test]
fn complex_plane_matches_classical_integral() {
    // ∫ (c0 + c1 z + c2 z^2) dz over a polyline in C_{i_k}, against complex arithmetic.
    let c = [0.7, -1.3, 0.4];
    let mu = parse_phrase("0.7 - 1.3*z + 0.4*z^2").unwrap();
    for k in [1usize, 5] {
        let embed = |re: f64, im: f64| {
            let mut z = CdNumber::zero(3);
            z[0] = re;
            z[k] = im;
            z
        };
        let pts = [(0.1, -0.2), (0.6, 0.3), (-0.4, 0.8), (0.2, 0.5)];
        let path = Path::new(pts.iter().map(|&(x, y)| embed(x, y)).collect()).unwrap();
        let prim = |(x, y): (f64, f64)| {
            // c0 z + c1 z^2/2 + c2 z^3/3
            let z2 = (x * x - y * y, 2.0 * x * y);
            let z3 = (z2.0 * x - z2.1 * y, z2.0 * y + z2.1 * x);
            (c[0] * x + c[1] * z2.0 / 2.0 + c[2] * z3.0 / 3.0, c[0] * y + c[1] * z2.1 / 2.0 + c[2] * z3.1 / 3.0)
        };
        let (e, s) = (prim(pts[3]), prim(pts[0]));
        let v = line_integrate(&mu, &path, None, &LineOptions::default()).unwrap();
        assert!(v.max_abs_diff(&embed(e.0 - s.0, e.1 - s.1)) < 1e-9);
    }
}

#[test]
fn reversal_negates() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mu = random_phrase(&mut rng, 3, 3);
    let path = Path::new((0..3).map(|_| random_cd(&mut rng, 3).scale(0.5)).collect()).unwrap();
    let opts = LineOptions::default();
    let f = line_integrate(&mu, &path, None, &opts).unwrap();
    let r = line_integrate(&mu, &path.reversed(), None, &opts).unwrap();
    assert!((&f + &r).norm() < 1e-10);
}

#[test]
fn convergence_failure_is_reported() {
    let mu = parse_phrase("z^3").unwrap();
    let path = Path::segment(CdNumber::zero(2), cd(&[1.0, 1.0, 0.0, 0.0]));
    let opts = LineOptions { rtol: 0.0, max_refinements: 2, min_refinements: 1 };
    match line_integrate(&mu, &path, None, &opts) {
        Err(Error::Convergence { refinements: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn nu_table_matches_arctan() {
    let t = NuTable::build(&|x| Ok(1.0 + x * x), -1.5, 1.5).unwrap();
    for k in 0..=300 {
        let x = -1.5 + 0.01 * k as f64;
        let exact = x.atan() - (-1.5f64).atan();
        assert!((t.eval(x).unwrap() - exact).abs() < 1e-12, "{x}");
    }
    assert!(matches!(t.eval(1.6), Err(Error::Domain(_))));
    assert!(matches!(NuTable::build(&|x| Ok(x), -1.0, 1.0), Err(Error::Singular(_))));
}

#[test]
fn nu_system_classes() {
    let op = PsiOperator::new(2, vec![(1, parse("1 + z1^2", 4).unwrap()), (2, Expr::num(2.0))]).unwrap();
    let sys = op.nu_system(-1.0, 1.0).unwrap();
    let z = cd(&[0.3, 0.4, -0.6, 0.9]);
    assert!((sys.nus[0].eval(&z).unwrap() - (0.4f64.atan() + 1.0f64.atan())).abs() < 1e-12);
    assert_eq!(sys.nus[1].eval(&z).unwrap(), -0.3);
    let coupled = PsiOperator::new(2, vec![(1, parse("1 + z2^2", 4).unwrap())]).unwrap();
    assert!(matches!(coupled.nu_system(-1.0, 1.0), Err(Error::Spec(_))));
    let zero = PsiOperator::constant(2, &[(1, 0.0)]).unwrap();
    assert!(matches!(zero.nu_system(-1.0, 1.0), Err(Error::Singular(_))));
    let vanishing = PsiOperator::new(2, vec![(1, parse("z1", 4).unwrap())]).unwrap();
    assert!(matches!(vanishing.nu_system(-1.0, 1.0), Err(Error::Singular(_))));
}

#[test]
fn first_order_round_trip() {
    let op = PsiOperator::new(2, vec![(1, parse("1 + z1^2", 4).unwrap()), (3, Expr::num(0.5))]).unwrap();
    assert_eq!(PsiOperator::from_first_order(&op.to_first_order()).unwrap().slots.len(), 2);
    let mut bad = op.to_first_order();
    bad.terms[0].coeff[0].unit = crate::algebra::Ccd::from_real(CdNumber::basis(2, 2));
    assert!(matches!(PsiOperator::from_first_order(&bad), Err(Error::Spec(_))));
}

fn left_inverse_residual(f: Integrand<'_>, op: &PsiOperator, grid: &TargetGrid) -> f64 {
    let z0 = CdNumber::zero(op.level);
    let big = antiderivative_field(f, op, &z0, grid, PathFamily::Staircase, &LineOptions::default()).unwrap();
    let small = grid.sample(&z0, f).unwrap();
    verify_left_inverse(&big, &small, &op.to_first_order()).unwrap().max_residual
}

#[test]
fn antiderivative_of_one_in_one_slot() {
    let op = PsiOperator::constant(1, &[(1, 1.0)]).unwrap();
    let f = |_: &CdNumber| Ok(CdNumber::one(1));
    let z = cd(&[0.2, 0.7]);
    let v = antiderivative(&f, &op, &Path::segment(CdNumber::zero(1), z), &LineOptions::default()).unwrap();
    assert!(v.max_abs_diff(&CdNumber::basis(1, 1).scale(0.7)) < 1e-12);
    let grid = TargetGrid::cube(2, 7, -1.0, 1.0);
    assert!(left_inverse_residual(&f, &op, &grid) < 1e-12);
}

#[test]
fn antiderivative_vanishes_at_base_point() {
    let op = PsiOperator::new(2, vec![(1, parse("1 + z1^2", 4).unwrap())]).unwrap();
    let f = |z: &CdNumber| Ok(z.mul(z));
    let z0 = cd(&[0.1, -0.3, 0.2, 0.4]);
    let v = antiderivative(&f, &op, &Path::segment(z0.clone(), z0), &LineOptions::default()).unwrap();
    assert_eq!(v.norm(), 0.0);
}

#[test]
fn one_slot_constant_psi_polynomial() {
    let op = PsiOperator::constant(2, &[(1, 2.0)]).unwrap();
    let e = parse("z0*z1 - z1^3*i2 + z2*i3 + 1", 4).unwrap();
    let f = |z: &CdNumber| Ok(e.eval(z.coeffs())?.embed(2));
    let grid = TargetGrid { shape: vec![5, 9, 5], origin: vec![-0.5, -1.0, -0.5], spacing: vec![0.25, 0.25, 0.25] };
    assert!(left_inverse_residual(&f, &op, &grid) < 1e-10);
}

#[test]
fn one_slot_separable_psi() {
    let op = PsiOperator::new(2, vec![(1, parse("1 + z1^2", 4).unwrap())]).unwrap();
    let e = parse("z0 + z1*i1 + z2*i2 + z3*i3", 4).unwrap();
    let f = |z: &CdNumber| Ok(e.eval(z.coeffs())?.embed(2));
    let grid = TargetGrid { shape: vec![3, 81], origin: vec![-0.5, -1.0], spacing: vec![0.5, 0.025] };
    assert!(left_inverse_residual(&f, &op, &grid) < 1e-6);
}

#[test]
fn several_slots_invert_constants_only() {
    // With n ≥ 2 the line integrals of f against ν_j depend on the path unless
    // f is constant, and the cross terms of Υ F no longer cancel.
    let op = PsiOperator::constant(2, &[(1, 1.0), (2, 1.0), (3, 1.0)]).unwrap();
    let grid = TargetGrid::cube(4, 6, -0.5, 0.75);
    let c = cd(&[0.3, -0.1, 0.7, 0.2]);
    let constant = |_: &CdNumber| Ok(c.clone());
    assert!(left_inverse_residual(&constant, &op, &grid) < 1e-10);
    let e = parse("z0 + z1*i1 + z2*i2 + z3*i3", 4).unwrap();
    let identity = |z: &CdNumber| Ok(e.eval(z.coeffs())?.embed(2));
    assert!(left_inverse_residual(&identity, &op, &grid) > 0.1);
}

#[test]
fn stencil_needs_five_nodes() {
    let op = PsiOperator::constant(1, &[(1, 1.0)]).unwrap();
    let g = GridField::cube(2, 4, 0.0, 1.0, |_| Ok(CdNumber::one(1))).unwrap();
    assert!(matches!(verify_left_inverse(&g, &g, &op.to_first_order()), Err(Error::Stencil(_))));
    let h = GridField::cube(2, 5, 0.0, 1.0, |_| Ok(CdNumber::one(1))).unwrap();
    assert!(matches!(verify_left_inverse(&g, &h, &op.to_first_order()), Err(Error::Alignment(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn concatenation_is_additive(seed in 0u64..1000, r in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_phrase(&mut rng, 3, 2);
        let pts: Vec<CdNumber> = (0..5).map(|_| random_cd(&mut rng, 3)).collect();
        let g1 = Path::new(pts[..3].to_vec()).unwrap();
        let g2 = Path::new(pts[2..].to_vec()).unwrap();
        let whole = riemann_sum(&mu, &g1.concat(&g2).unwrap(), None, r).unwrap();
        let parts = &riemann_sum(&mu, &g1, None, r).unwrap() + &riemann_sum(&mu, &g2, None, r).unwrap();
        prop_assert!(whole.max_abs_diff(&parts) < 1e-12 * (1.0 + whole.norm()));
    }

    #[test]
    fn variation_is_sum_of_distances(seed in 0u64..1000, len in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<CdNumber> = (0..len).map(|_| random_cd(&mut rng, 3)).collect();
        let oracle: f64 = pts
            .windows(2)
            .map(|w| w[0].coeffs().iter().zip(w[1].coeffs()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum();
        prop_assert!((Path::new(pts).unwrap().variation() - oracle).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_is_real_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_phrase(&mut rng, 2, 2);
        let q = random_phrase(&mut rng, 2, 2);
        let op = PsiOperator::new(2, vec![(1, parse("1 + z1^2", 4).unwrap()), (2, Expr::num(1.5))]).unwrap();
        let path = family_path(PathFamily::Staircase, &op, &CdNumber::zero(2), &random_cd(&mut rng, 2));
        let opts = LineOptions::default();
        let comb = |z: &CdNumber| Ok(&p.eval(z).scale(a) + &q.eval(z).scale(b));
        let lhs = antiderivative(&comb, &op, &path, &opts).unwrap();
        let fp = antiderivative(&|z: &CdNumber| Ok(p.eval(z)), &op, &path, &opts).unwrap();
        let fq = antiderivative(&|z: &CdNumber| Ok(q.eval(z)), &op, &path, &opts).unwrap();
        let rhs = &fp.scale(a) + &fq.scale(b);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10 * (1.0 + lhs.norm()));
    }
}
