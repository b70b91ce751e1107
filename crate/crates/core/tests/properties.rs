use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tentlab_core::coeffs::{check_ellipticity, random_elliptic_staircase};
use tentlab_core::evolve::{Propagator, Scheme};
use tentlab_core::grid::{discrete_divergence, discrete_gradient, Grid, SpaceField};
use tentlab_core::linalg::max_singular_value;
use tentlab_core::maxreg::{random_probes, AutonomousKit};
use tentlab_core::verify::{check_struct_bound, gradient_identity_residual, rough_mean_zero, CheckReport};

fn random_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (1usize..=2, 4usize..=12, 0.5f64..4.0).prop_map(|(d, n, l)| Grid::new(d, n, l).unwrap())
}

fn staircase(n: usize, pieces: usize, seed: u64) -> Propagator {
    let grid = Grid::new(1, n, 1.0).unwrap();
    Propagator::build(random_elliptic_staircase(grid, 1.0 / 64.0, pieces, 0.5, 2.0, seed).unwrap(), Scheme::ExactExpm)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gradient_is_minus_adjoint_of_divergence(g in grid_strategy(), seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = SpaceField::scalar(g, random_values(&mut rng, g.cells())).unwrap();
        let f = SpaceField::new(g, g.dim(), random_values(&mut rng, g.dim() * g.cells())).unwrap();
        let lhs = discrete_gradient(&u).unwrap().inner(&f);
        let rhs = u.inner(&discrete_divergence(&f).unwrap());
        prop_assert!((lhs + rhs).norm() <= 1e-12 * u.norm() * f.norm());
    }

    #[test]
    fn gradient_vanishes_exactly_on_constants(g in grid_strategy(), re in -5.0f64..5.0, im in -5.0f64..5.0, bump in 0usize..1000) {
        let c = SpaceField::constant(g, Complex64::new(re, im));
        prop_assert!(discrete_gradient(&c).unwrap().norm() == 0.0);
        let mut v = c.clone();
        v.values_mut()[bump % g.cells()] += Complex64::new(1.0, 0.0);
        prop_assert!(discrete_gradient(&v).unwrap().norm() > 0.0);
    }

    #[test]
    fn balls_are_nested(g in grid_strategy(), center in 0usize..1000, r1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let c = center % g.cells();
        let small = g.parabolic_ball(c, r1);
        let big = g.parabolic_ball(c, r1 + extra);
        prop_assert!(small.iter().all(|x| big.contains(x)));
        prop_assert!(small.contains(&c));
    }

    #[test]
    fn balls_are_translation_equivariant(g in grid_strategy(), center in 0usize..1000, shift in 0usize..1000, r in 0.0f64..2.0) {
        let n = g.points_per_axis();
        let c = center % g.cells();
        let offset = [shift % n, (shift / n) % n * (g.dim() - 1)];
        let mut moved: Vec<usize> = g.parabolic_ball(c, r).into_iter().map(|x| g.translate(x, offset)).collect();
        let mut direct = g.parabolic_ball(g.translate(c, offset), r);
        moved.sort_unstable();
        direct.sort_unstable();
        prop_assert_eq!(moved, direct);
    }

    #[test]
    fn staircases_respect_ellipticity(seed in 0u64..10_000, pieces in 1usize..4) {
        let grid = Grid::new(2, 4, 1.0).unwrap();
        let field = random_elliptic_staircase(grid, 1.0, pieces, 0.5, 2.0, seed).unwrap();
        let el = check_ellipticity(&field).unwrap();
        prop_assert!(el.lambda >= 0.5 - 1e-12);
        prop_assert!(el.big_lambda <= 2.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn propagators_contract(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = staircase(16, 3, seed);
        let horizon = p.field().horizon();
        let (s, t) = (horizon * a.min(b), horizon * a.max(b));
        prop_assert!(max_singular_value(p.dense(t, s).unwrap().view()) <= 1.0 + 1e-10);
    }

    #[test]
    fn propagators_chain_through_breakpoints(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = staircase(12, 4, seed);
        let horizon = p.field().horizon();
        let mid = p.field().breakpoints()[2];
        let (r, t) = (mid * a, mid + (horizon - mid) * b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SpaceField::scalar(*p.grid(), random_values(&mut rng, 12)).unwrap();
        let two = p.apply(t, mid, &p.apply(mid, r, &f).unwrap()).unwrap();
        let one = p.apply(t, r, &f).unwrap();
        prop_assert!(two.max_abs_diff(&one) <= 1e-12 * f.norm().max(1.0));
    }

    #[test]
    fn adjoint_pairs_and_matches_time_reversal(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = staircase(12, 3, seed);
        let horizon = p.field().horizon();
        let (s, t) = (horizon * a.min(b), horizon * a.max(b));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let f = SpaceField::scalar(*p.grid(), random_values(&mut rng, 12)).unwrap();
        let h = SpaceField::scalar(*p.grid(), random_values(&mut rng, 12)).unwrap();
        let lhs = p.apply(t, s, &f).unwrap().inner(&h);
        let rhs = f.inner(&p.adjoint_apply(t, s, &h).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12 * f.norm() * h.norm());
        let reversed = p.adjoint_via_time_reversal(t, s, &h).unwrap();
        prop_assert!(reversed.max_abs_diff(&p.adjoint_apply(t, s, &h).unwrap()) <= 1e-11 * h.norm());
    }

    #[test]
    fn constants_are_conserved(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = staircase(16, 3, seed);
        let horizon = p.field().horizon();
        let (s, t) = (horizon * a.min(b), horizon * a.max(b));
        let one = SpaceField::constant(*p.grid(), Complex64::new(1.0, 0.0));
        prop_assert!(p.apply(t, s, &one).unwrap().max_abs_diff(&one) <= 1e-12);
        prop_assert!(p.adjoint_apply(t, s, &one).unwrap().max_abs_diff(&one) <= 1e-12);
    }

    #[test]
    fn kernel_columns_have_unit_mass_and_reproduce(seed in 0u64..10_000, y in 0usize..16, x in 0usize..16) {
        let p = staircase(16, 2, seed);
        let horizon = p.field().horizon();
        let (r, s, t) = (0.1 * horizon, 0.45 * horizon, 0.9 * horizon);
        let h = p.grid().cell_volume();
        let col = p.kernel_column(t, r, y).unwrap();
        let mass: Complex64 = col.values().iter().sum::<Complex64>() * h;
        prop_assert!((mass - 1.0).norm() <= 1e-12);
        let k_sr = p.kernel_column(s, r, y).unwrap();
        let k_ts = p.dense(t, s).unwrap();
        let composed: Complex64 = (0..16).map(|z| k_ts[[x, z]] * k_sr.values()[z]).sum();
        prop_assert!((composed - col.values()[x]).norm() <= 1e-10 * col.values().iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn gradient_of_rl_matches_ml_tilde(seed in 0u64..10_000) {
        let grid = Grid::new(1, 16, 1.0).unwrap();
        let field = random_elliptic_staircase(grid, 1.0 / 64.0, 1, 0.5, 2.0, seed).unwrap();
        let kit = AutonomousKit::new(&field).unwrap();
        let times: Vec<f64> = (1..=8).map(|j| j as f64 / 512.0).collect();
        let probes = random_probes(grid, &times, 1, 2, seed).unwrap();
        prop_assert!(gradient_identity_residual(&kit, &probes).unwrap() <= 1e-9);
    }

    #[test]
    fn struct_bound_ratio_is_scale_invariant(seed in 0u64..10_000, re in -4.0f64..4.0, im in -4.0f64..4.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let p = staircase(16, 2, seed);
        let u0 = rough_mean_zero(p.grid());
        let a = check_struct_bound(&p, &u0).unwrap();
        let b = check_struct_bound(&p, &u0.scaled(Complex64::new(re, im))).unwrap();
        prop_assert!((a.slack["inequality"] - b.slack["inequality"]).abs() <= 1e-8);
    }

    #[test]
    fn report_pass_follows_slack(entries in prop::collection::vec((0.0f64..3.0, 0.1f64..3.0), 1..6), tol in 0.0f64..0.5) {
        let mut r = CheckReport::new("offdiagonal", tol, "test");
        for (i, (m, b)) in entries.iter().enumerate() {
            r.compare(format!("k{i}"), *m, *b, "m ≤ b");
        }
        let expected = entries.iter().all(|(m, b)| m / b <= 1.0 + tol);
        prop_assert_eq!(r.pass, expected);
        prop_assert_eq!(r.failed(), !expected);
        prop_assert_eq!(r.rows().len(), entries.len());
    }
}
