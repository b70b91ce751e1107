use num_complex::Complex64;
use tentlab_core::coeffs::{make_scenario, random_elliptic_staircase, CoefficientField, Scenario};
use tentlab_core::evolve::{Propagator, Scheme};
use tentlab_core::fourier;
use tentlab_core::grid::{Grid, SpaceField, SpaceTimeField};
use tentlab_core::norms::NormConfig;
use tentlab_core::verify::*;

const T: f64 = 1.0 / 64.0;

fn grid(n: usize) -> Grid {
    Grid::new(1, n, 1.0).unwrap()
}

fn prop(scenario: Scenario, n: usize) -> Propagator {
    Propagator::build(make_scenario(&scenario, grid(n), T, 1).unwrap(), Scheme::ExactExpm).unwrap()
}

fn heat(n: usize) -> Propagator {
    prop(Scenario::Heat {}, n)
}

fn checker(n: usize) -> Propagator {
    prop(Scenario::RealCheckerboard { lo: 0.5, hi: 2.0, blocks: 8 }, n)
}

fn heat_mode(g: Grid, k: usize) -> SpaceField {
    SpaceField::scalar(g, fourier::mode(&g, [k, 0])).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn contraction_heat_attains_one() {
    let r = check_contraction(&heat(32), &time_pairs(T)).unwrap();
    assert!(r.pass);
    assert!((r.measured["sigma_max"] - 1.0).abs() < 1e-12);
}

#[test]
fn contraction_at_zero_step_is_identity() {
    let r = check_contraction(&checker(32), &[(0.5 * T, 0.5 * T)]).unwrap();
    assert_eq!(r.measured["sigma_max"], 1.0);
}

#[test]
fn contraction_on_random_complex_staircases() {
    for seed in 0..20 {
        let field = random_elliptic_staircase(grid(64), T, 4, 0.5, 2.0, seed).unwrap();
        let p = Propagator::build(field, Scheme::ExactExpm).unwrap();
        let r = check_contraction(&p, &[(T, 0.0), (0.7 * T, 0.2 * T)]).unwrap();
        assert!(r.pass, "seed {seed}: {:?}", r.measured);
        assert!(r.measured["sigma_max"] <= 1.0 + 1e-10);
    }
}

#[test]
fn offdiagonal_heat_at_ratio_nine() {
    let p = heat(64);
    let r = check_offdiagonal_ratios(&p, &[9.0]).unwrap();
    assert!(r.pass);
    assert!((r.predicted_bound["ratio=9"] - (-2.25f64).exp()).abs() < 1e-12);
    assert!((r.predicted_bound["ratio=9"] - 0.1054).abs() < 1e-4);
    assert!(r.measured["ratio=9"] < r.predicted_bound["ratio=9"]);
}

#[test]
fn offdiagonal_checkerboard_uses_one_over_thirty_two() {
    let p = checker(64);
    assert!((p.field().ellipticity().alpha - 1.0 / 32.0).abs() < 1e-15);
    let r = check_offdiagonal_ratios(&p, &DEFAULT_RATIOS).unwrap();
    assert!(r.pass, "{:?}", r.slack);
    assert!((r.predicted_bound["ratio=16"] - (-0.5f64).exp()).abs() < 1e-12);
}

#[test]
fn offdiagonal_adjacent_sets_have_trivial_bound() {
    let p = heat(64);
    let r = check_offdiagonal(&p, &[10], &[11], 1.0 / 64.0, 0.0).unwrap();
    assert!(r.pass);
    assert!(r.predicted_bound["block"] > 0.99);
}

#[test]
fn offdiagonal_rejects_overlapping_sets() {
    assert!(check_offdiagonal(&heat(32), &[3, 4], &[4, 5], T, 0.0).is_err());
}

#[test]
fn conservation_every_scheme() {
    for scheme in [Scheme::ExactExpm, Scheme::CrankNicolson { substeps: Some(3) }] {
        let field = random_elliptic_staircase(grid(32), T, 3, 0.5, 2.0, 9).unwrap();
        let r = check_conservation(&Propagator::build(field, scheme).unwrap(), &time_pairs(T)).unwrap();
        assert!(r.measured["forward"] <= 1e-12, "{scheme:?}");
        assert!(r.measured["adjoint"] <= 1e-12, "{scheme:?}");
    }
}

#[test]
fn norm_equivalence_single_mode_closed_form() {
    let p = heat(32);
    let u0 = heat_mode(*p.grid(), 1);
    let r = check_norm_equivalence(&p, &u0).unwrap();
    assert!(r.pass);
    // ∫₀^∞ ‖∇u‖² = ‖u₀‖²/2 because |σ(k)|² is both the decay rate and the gradient symbol.
    assert!(close(r.measured["grad_l2_l2"], u0.norm() / 2f64.sqrt(), 1e-8));
    assert!((r.slack["lower"] - 1.0).abs() < 1e-8);
    assert!((r.slack["upper"] - 1.0).abs() < 1e-8);
}

#[test]
fn norm_equivalence_zero_datum() {
    let p = checker(32);
    let r = check_norm_equivalence(&p, &SpaceField::zeros(*p.grid(), 1)).unwrap();
    assert!(r.pass);
    assert!(r.measured.values().filter(|v| v.is_finite()).all(|&v| v >= 0.0));
    assert_eq!(r.measured["lower"], 0.0);
    assert_eq!(r.measured["upper"], 0.0);
}

#[test]
fn norm_equivalence_checkerboard_strict() {
    let p = checker(64);
    let r = check_norm_equivalence(&p, &smooth_mean_zero(p.grid())).unwrap();
    assert!(r.pass);
    assert!(r.slack["lower"] < 1.0 && r.slack["upper"] < 1.0);
}

#[test]
fn norm_equivalence_requires_mean_zero() {
    let p = heat(16);
    assert!(check_norm_equivalence(&p, &SpaceField::constant(*p.grid(), Complex64::new(1.0, 0.0))).is_err());
}

#[test]
fn energy_single_mode_closed_form() {
    let p = heat(32);
    let g = *p.grid();
    let u0 = heat_mode(g, 2);
    let r = check_energy_equality(&p, &u0, T).unwrap();
    assert!(r.measured["residual"] <= 1e-10);
    let mu = fourier::laplacian_symbol(&g, 2);
    let expected = (1.0 - (-2.0 * mu * T).exp()) * u0.norm().powi(2);
    assert!(close(r.measured["dissipation"], expected, 1e-10));
}

#[test]
fn energy_constant_datum_is_exact() {
    let p = checker(32);
    let u0 = SpaceField::constant(*p.grid(), Complex64::new(0.3, -0.2));
    let r = check_energy_equality(&p, &u0, T).unwrap();
    assert!(r.measured["residual"] <= 1e-13, "{:?}", r.measured);
    assert!(r.measured["dissipation"].abs() <= 1e-14);
}

#[test]
fn energy_complex_perturbation() {
    let p = prop(Scenario::ComplexPerturb { epsilon: 0.05, tiles: 8, pieces: 4 }, 64);
    let u0 = rough_mean_zero(p.grid());
    let r = check_energy_equality(&p, &u0, T).unwrap();
    assert!(r.pass);
    assert!(r.measured["residual"] <= 1e-7);
}

#[test]
fn energy_cn_converges_at_second_order() {
    let field = make_scenario(&Scenario::RealCheckerboard { lo: 0.5, hi: 2.0, blocks: 8 }, grid(32), T, 1).unwrap();
    let u0 = rough_mean_zero(&grid(32));
    let final_sq = |scheme| {
        check_energy_equality(&Propagator::build(field.clone(), scheme).unwrap(), &u0, T).unwrap().measured["final_sq"]
    };
    let exact = final_sq(Scheme::ExactExpm);
    let e1 = (final_sq(Scheme::CrankNicolson { substeps: Some(16) }) - exact).abs();
    let e2 = (final_sq(Scheme::CrankNicolson { substeps: Some(32) }) - exact).abs();
    let order = (e1 / e2).log2();
    assert!((1.8..2.3).contains(&order), "observed order {order}");
}

#[test]
fn interior_representation_self_consistent() {
    let p = checker(32);
    let g = *p.grid();
    let u0 = random_field(&g, &mut rng(3, 0));
    let u = solve_at(&p, &u0, &[0.25 * T, T]).unwrap();
    let hs: Vec<SpaceField> = (1..4).map(|s| random_field(&g, &mut rng(3, s))).collect();
    let r = check_interior_representation(&p, &u, 0.25 * T, T, &hs).unwrap();
    assert!(r.measured["pairing"] <= 1e-12);
}

#[test]
fn interior_representation_constant_probe_pairs_means() {
    let p = checker(32);
    let g = *p.grid();
    let u = solve_at(&p, &random_field(&g, &mut rng(4, 0)), &[0.0, T]).unwrap();
    let one = SpaceField::constant(g, Complex64::new(1.0, 0.0));
    assert!(pairing_residual(&p, &u, 0.0, T, &[one]).unwrap() <= 1e-13);
    assert!((u.slices()[0].mean() - u.slices()[1].mean()).norm() <= 1e-13);
}

#[test]
fn interior_representation_cross_scheme_is_scheme_error() {
    let field = make_scenario(&Scenario::Heat {}, grid(32), T, 1).unwrap();
    let exact = Propagator::build(field.clone(), Scheme::ExactExpm).unwrap();
    let cn = Propagator::build(field, Scheme::CrankNicolson { substeps: Some(4) }).unwrap();
    let g = *exact.grid();
    let u = solve_at(&cn, &rough_mean_zero(&g), &[0.0, T]).unwrap();
    let hs = vec![random_field(&g, &mut rng(5, 1))];
    let res = pairing_residual(&exact, &u, 0.0, T, &hs).unwrap();
    assert!(res > 1e-12 && res < 1e-2, "cross-scheme residual {res}");
}

#[test]
fn reverse_holder_constant_ratio_is_one() {
    let g = grid(32);
    let dt = 1.0 / 1024.0;
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * dt).collect();
    let slices = times.iter().map(|_| SpaceField::constant(g, Complex64::new(2.0, 1.0))).collect();
    let u = SpaceTimeField::new(g, times, slices, None).unwrap();
    let (ratio, count) = reverse_holder_sup(&u, dt, &[1, 4], 6.0).unwrap();
    assert!((ratio - 1.0).abs() < 1e-12);
    assert!(count > 0);
}

#[test]
fn reverse_holder_exponent_in_two_dimensions() {
    let g = Grid::new(2, 8, 1.0).unwrap();
    let field = make_scenario(&Scenario::Heat {}, g, T, 0).unwrap();
    assert_eq!(field.ellipticity().rh_exponent, 4.0);
    assert_eq!(make_scenario(&Scenario::Heat {}, grid(8), T, 0).unwrap().ellipticity().rh_exponent, 6.0);
}

#[test]
fn reverse_holder_heat_refinement_stable() {
    let datum = |g: &Grid| box_indicator(g, [0.5, 0.5], 1.0 / 16.0);
    let r = check_reverse_holder(&heat(32), &heat(64), &datum).unwrap();
    assert!(r.pass, "{:?}", r.measured);
    assert!(r.measured["ratio/n=32"].is_finite() && r.measured["ratio/n=32"] >= 1.0);
}

#[test]
fn local_energy_constant_has_no_gradient() {
    let p = checker(64);
    let u0 = SpaceField::constant(*p.grid(), Complex64::new(1.0, 0.0));
    let cyl = Cylinder { center: 32, radius: 0.125, a: 0.25 * T, b: T, c: 0.625 * T };
    let r = check_local_energy(&p, &u0, &cyl).unwrap();
    assert!(r.pass);
    assert!(r.measured["gradient"].abs() < 1e-24);
}

#[test]
fn local_energy_random_datum() {
    let p = checker(64);
    let u0 = random_field(p.grid(), &mut rng(2, 7));
    let cyl = Cylinder { center: 20, radius: 0.125, a: 0.25 * T, b: T, c: 0.625 * T };
    let r = check_local_energy(&p, &u0, &cyl).unwrap();
    assert!(r.pass, "{:?}", r.slack);
    assert!(r.measured["kappa"] > 1.0);
}

#[test]
fn local_energy_rejects_tiny_radius() {
    let p = heat(16);
    let u0 = random_field(p.grid(), &mut rng(2, 8));
    let cyl = Cylinder { center: 3, radius: 0.1, a: 0.0, b: T, c: 0.5 * T };
    assert!(check_local_energy(&p, &u0, &cyl).is_err());
}

#[test]
fn max_square_heat_is_refinement_stable() {
    let r = check_max_square(&heat(32), &heat(64), &rough_mean_zero, &[2.0], &NormConfig::dyadic(T, 15, 1.0).unwrap())
        .unwrap();
    assert!(r.pass, "{:?}", r.measured);
    let a = r.measured["p=2/xp_over_tent/n=32"];
    assert!(a.is_finite() && a > 0.0);
    assert!((a * r.measured["p=2/tent_over_xp/n=32"] - 1.0).abs() < 1e-12);
}

#[test]
fn max_square_checkerboard_p4_reported() {
    let r = check_max_square(
        &checker(32),
        &checker(64),
        &rough_mean_zero,
        &[4.0],
        &NormConfig::dyadic(T, 15, 1.0).unwrap(),
    )
    .unwrap();
    assert!(r.measured["p=4/xp_over_tent/n=64"].is_finite());
    assert!(r.measured["p=4/tent_over_xp/n=64"].is_finite());
}

#[test]
fn struct_bound_single_mode_closed_form() {
    let p = heat(32);
    let u0 = heat_mode(*p.grid(), 1);
    let r = check_struct_bound(&p, &u0).unwrap();
    assert!(r.pass);
    // Both integrals equal ‖u₀‖²/2 for a heat mode, so the bound is attained.
    let half = u0.norm() / 2f64.sqrt();
    assert!(close(r.measured["grad_l2_l2"], half, 1e-8));
    assert!(close(r.measured["dt_l2_hneg1"], half, 1e-8));
    assert!((r.slack["inequality"] - 1.0).abs() < 1e-8);
}

#[test]
fn struct_bound_zero_datum() {
    let p = heat(16);
    let r = check_struct_bound(&p, &SpaceField::zeros(*p.grid(), 1)).unwrap();
    assert!(r.pass);
    assert_eq!(r.measured["inequality"], 0.0);
    assert_eq!(r.predicted_bound["inequality"], 0.0);
}

#[test]
fn struct_bound_is_homogeneous() {
    let p = checker(32);
    let u0 = rough_mean_zero(p.grid());
    let a = check_struct_bound(&p, &u0).unwrap();
    let b = check_struct_bound(&p, &u0.scaled(Complex64::new(0.0, 3.0))).unwrap();
    assert!(close(b.measured["inequality"], 3.0 * a.measured["inequality"], 1e-10));
    assert!(close(b.predicted_bound["inequality"], 3.0 * a.predicted_bound["inequality"], 1e-8));
    assert!((a.slack["inequality"] - b.slack["inequality"]).abs() < 1e-8);
}

#[test]
fn whitney_constant_datum_has_zero_error() {
    let p = checker(64);
    let u0 = SpaceField::constant(*p.grid(), Complex64::new(1.5, 0.0));
    let r = check_whitney_fatou(&p, &u0, &[0.0]).unwrap();
    assert!(r.pass);
    for (k, v) in &r.measured {
        if k.starts_with("error/") || k.starts_with("jump_cells_error") {
            assert!(*v < 1e-13, "{k} = {v}");
        }
    }
}

#[test]
fn whitney_step_converges_away_from_jumps() {
    let p = checker(64);
    let u0 = half_step(p.grid());
    let r = check_whitney_fatou(&p, &u0, &[0.0, 0.5]).unwrap();
    assert!(r.pass, "{:?}", r.slack);
    assert!(r.measured["final"] <= 1e-3);
    assert!(r.measured["error/00"] > r.measured["final"]);
    // At the jump the averages stay away from the datum.
    assert!(r.measured["jump_cells_error/0/last"] > 1e-3);
}

#[test]
fn whitney_continuous_datum_converges_uniformly() {
    let p = heat(64);
    let g = *p.grid();
    let u0 = SpaceField::from_fn(g, |x| Complex64::new((2.0 * std::f64::consts::PI * x[0]).cos(), 0.0));
    let cells: Vec<usize> = (0..g.cells()).collect();
    let deltas = [1.0 / 1024.0, 1.0 / 4096.0, 1.0 / 16384.0];
    let u = solve_at(&p, &u0, &geometric_times(1.0 / 1024.0, 9, 4)).unwrap();
    let e = whitney_errors(&u, &u0, &cells, &deltas).unwrap();
    // Lipschitz data converge at the rate √δ.
    assert!(e[0] > 8.0 * e[2] && e[1] > e[2], "{e:?}");
}

#[test]
fn bv_budget_zero_is_jump_count_independent() {
    let g = grid(32);
    let fam = BvFamily::default();
    let est = |k| {
        sup_lp_norm(
            &Propagator::build(bv_family_field(g, T, k, 0.0, &fam).unwrap(), Scheme::ExactExpm).unwrap(),
            1.5,
            8,
        )
        .unwrap()
    };
    let one = est(1);
    for k in [2, 4, 16] {
        assert!((est(k) - one).abs() <= 1e-10, "K = {k}");
    }
}

#[test]
fn bv_one_versus_sixteen_jumps() {
    let g = grid(32);
    let fam = BvFamily::default();
    let est = |k| {
        sup_lp_norm(
            &Propagator::build(bv_family_field(g, T, k, 0.5, &fam).unwrap(), Scheme::ExactExpm).unwrap(),
            1.5,
            16,
        )
        .unwrap()
    };
    let (a, b) = (est(1), est(16));
    assert!(relative_variation(a, b) <= 0.1, "{a} vs {b}");
}

#[test]
fn bv_family_field_has_prescribed_budget() {
    let f = bv_family_field(grid(16), T, 8, 0.5, &BvFamily::default()).unwrap();
    assert_eq!(f.piece_count(), 9);
    assert!((f.bv() - 0.5).abs() < 1e-12);
}

#[test]
fn bv_near_two_is_almost_contractive() {
    let g = grid(32);
    let p = Propagator::build(bv_family_field(g, T, 4, 0.5, &BvFamily::default()).unwrap(), Scheme::ExactExpm).unwrap();
    let est = sup_lp_norm(&p, 1.9, 16).unwrap();
    assert!((1.0..=1.02).contains(&est), "p = 1.9 estimate {est}");
}

#[test]
fn bv_uniformity_report() {
    let fam = BvFamily { jump_counts: vec![1, 4, 16], ..BvFamily::default() };
    let r = check_bv_uniformity(grid(16), Scheme::ExactExpm, T, 1.5, &fam).unwrap();
    assert!(r.pass, "{:?}", r.measured);
    for k in ["K=01", "K=04", "K=16"] {
        assert!(r.measured[k] >= 1.0);
    }
    assert!(check_bv_uniformity(grid(16), Scheme::ExactExpm, T, 2.0, &fam).is_err());
}

#[test]
fn kernel_gaussian_heat_fit() {
    let fit = fit_gaussian(&heat(128)).unwrap();
    let gauss = (4.0 * std::f64::consts::PI).powf(-0.5);
    assert!(fit.c0 >= gauss && close(fit.c0, gauss, 0.02), "C0 = {}", fit.c0);
    assert!((fit.rate - 1.0).abs() < 0.05, "c = {}", fit.rate);
    let r = check_kernel_gaussian(&heat(64), &heat(128)).unwrap();
    assert!(r.pass);
}

#[test]
fn kernel_gaussian_skips_complex_coefficients() {
    let p = prop(Scenario::ComplexPerturb { epsilon: 0.05, tiles: 8, pieces: 2 }, 16);
    let r = check_kernel_gaussian(&p, &p).unwrap();
    assert_eq!(r.status, CheckStatus::Skipped);
    assert!(!r.pass);
    assert!(!r.failed());
    assert!(r.notes.iter().any(|n| n.contains("real coefficients")));
}

#[test]
fn kernel_gaussian_checkerboard_finite() {
    let fit = fit_gaussian(&checker(64)).unwrap();
    assert!(fit.constant.is_finite() && fit.rate > 0.0);
}

#[test]
fn duhamel_autonomous_and_constant() {
    let p = checker(32);
    let reference: CoefficientField = p.field().clone();
    let h = rough_mean_zero(p.grid());
    assert!(check_duhamel(&p, &reference, &h, T).unwrap().measured["residual"] <= 1e-12);
    let one = SpaceField::constant(*p.grid(), Complex64::new(1.0, 0.0));
    let heat_ref = make_scenario(&Scenario::Heat {}, *p.grid(), T, 0).unwrap();
    assert!(check_duhamel(&p, &heat_ref, &one, T).unwrap().measured["residual"] <= 1e-10);
}

#[test]
fn duhamel_complex_perturbation() {
    let p = prop(Scenario::ComplexPerturb { epsilon: 0.05, tiles: 8, pieces: 4 }, 64);
    let heat_ref = make_scenario(&Scenario::Heat {}, *p.grid(), T, 0).unwrap();
    let r = check_duhamel(&p, &heat_ref, &rough_mean_zero(p.grid()), T).unwrap();
    assert!(r.pass);
    assert!(r.measured["residual"] <= 1e-7);
}

#[test]
fn maxreg_check_heat() {
    let coarse = make_scenario(&Scenario::Heat {}, grid(32), T, 0).unwrap();
    let fine = make_scenario(&Scenario::Heat {}, grid(64), T, 0).unwrap();
    let r = check_maxreg(&coarse, &fine, 1).unwrap();
    assert!(r.pass, "{:?}", r.measured);
    assert!(r.measured["gradient_identity"] <= 1e-9);
}

#[test]
fn norm_identities_on_fifty_fields() {
    let r = check_norm_identities(grid(32), 50, 3).unwrap();
    assert!(r.pass);
    assert!(r.measured["tent"] <= 1e-12 && r.measured["slice"] <= 1e-12);
}

#[test]
fn suite_dispatches_every_registered_id() {
    let ids = check_ids();
    assert_eq!(ids.len(), CHECKS.len());
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let setup = Setup { scenario: Scenario::Heat {}, grid: grid(16), scheme: Scheme::ExactExpm, horizon: T, seed: 1 };
    assert!(run_check("no_such_check", &setup, &CheckOptions::default()).is_err());
    let r = run_check("check_conservation", &setup, &CheckOptions::default()).unwrap();
    assert_eq!(r.check_id, "conservation");
}

#[test]
fn reports_are_deterministic() {
    let setup = Setup {
        scenario: Scenario::ComplexPerturb { epsilon: 0.05, tiles: 4, pieces: 2 },
        grid: grid(32),
        scheme: Scheme::ExactExpm,
        horizon: T,
        seed: 5,
    };
    for id in ["local_energy", "offdiagonal", "norm_identities"] {
        let a = run_check_reported(id, &setup, &CheckOptions::default());
        let b = run_check_reported(id, &setup, &CheckOptions::default());
        assert_eq!(a, b, "{id}");
    }
}

#[test]
fn anchors_are_formulas() {
    let off = lookup("offdiagonal").unwrap();
    assert!(off.estimate.contains("α=λ/4Λ²"));
    assert!(CHECKS.iter().all(|c| !c.estimate.is_empty() && c.tolerance >= 0.0));
}
