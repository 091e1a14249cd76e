//! Property tests for the invariants of the geometry, flux, solver and
//! estimate layers.

use logdiff::estimates::{
    compute_j, holder_step_check, lower_barrier_check, scalar_log_inequality_check, verify_pair, EstimateOptions,
    JVariant,
};
use logdiff::flux::{bracket, compute_q, compute_q_with, CutoffSpec};
use logdiff::geometry::{
    annulus_area, disc_area, gauss_curvature, weighted_area, ConformalState, LogPolarGrid, ModelSolution,
};
use logdiff::quadrature::QuadOptions;
use logdiff::solver::{
    check_order_preservation, evolve, mms_residual, BoundarySchedule, SolverConfig, StepPolicy, Trajectory,
};
use proptest::prelude::*;

fn small_grid() -> LogPolarGrid {
    LogPolarGrid::graded(0.02, 8.0, 160, 1.02).unwrap()
}

fn geometric_config(t_end: f64) -> SolverConfig {
    SolverConfig::default()
        .with_step(StepPolicy::Geometric {
            dt0: 1e-5,
            growth: 1.2,
            dt_max: 2e-3,
        })
        .with_uniform_samples(0.0, t_end, 4)
}

/// `e^{−2s}(1 + amp·bump)` with a smooth bump centred at `centre`.
fn bumped_flat(grid: &LogPolarGrid, amp: f64, centre: f64) -> ConformalState {
    let values = grid
        .nodes()
        .iter()
        .map(|&s| (-2.0 * s).exp() * (1.0 + amp * (-(s - centre).powi(2) / 0.1).exp()))
        .collect();
    ConformalState::new(grid.clone(), values, 0.0).unwrap()
}

#[test]
fn model_residuals_converge_at_second_order() {
    for model in [ModelSolution::BigBang, ModelSolution::Cusp] {
        let coarse = LogPolarGrid::uniform(0.3, 6.0, 201).unwrap();
        let fine = coarse.refined();
        let e1 = mms_residual(model, &coarse, 1.0, 1e-3).unwrap();
        let e2 = mms_residual(model, &fine, 1.0, 1e-3).unwrap();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "{model:?}: {e1:e} → {e2:e}");
    }
    let flat = mms_residual(ModelSolution::FlatDisc, &small_grid(), 0.0, 1e-2).unwrap();
    assert!(flat < 1e-12, "{flat:e}");
}

#[test]
fn evolution_is_deterministic() {
    let g = small_grid();
    let flat = ModelSolution::FlatDisc.state(&g, 0.0).unwrap();
    let schedule = BoundarySchedule::ramp(&flat, 1e3);
    let a = evolve(&flat, &schedule, &geometric_config(0.05), 0.05).unwrap();
    let b = evolve(&flat, &schedule, &geometric_config(0.05), 0.05).unwrap();
    assert_eq!(a.times(), b.times());
    for k in 0..a.len() {
        assert_eq!(a.values(k), b.values(k));
    }
}

#[test]
fn certificates_are_monotone_in_solver_tolerance() {
    let spec = CutoffSpec::from_s(0.5, 0.1, 0.25).unwrap();
    let g = LogPolarGrid::graded(0.025, 8.0, 400, 1.01).unwrap();
    let opts = EstimateOptions::default();
    let mut previous: Option<bool> = None;
    for tol in [1e-12, 1e-10, 1e-8, 1e-6] {
        let config = SolverConfig {
            newton_tol: tol,
            ..SolverConfig::default()
        }
        .with_step(StepPolicy::Fixed { dt: 0.02 })
        .with_uniform_samples(0.5, 1.0, 5);
        let run = |model: ModelSolution| {
            let start = model.state(&g, 0.5).unwrap();
            evolve(&start, &BoundarySchedule::exact(model, &g), &config, 1.0).unwrap()
        };
        let report = verify_pair(&run(ModelSolution::BigBang), &run(ModelSolution::Cusp), &spec, &opts).unwrap();
        let passes = report.all_hold(0.0);
        // the discrete big-bang sits O(h²) below the exact barrier
        assert!(report.all_hold(1e-5), "tol = {tol:e}: {:e}", report.min_margin());
        if let Some(prev) = previous {
            assert!(passes || !prev, "loosening to {tol:e} turned a pass into a fail");
        }
        previous = Some(passes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn areas_respect_pointwise_order(
        base in prop::collection::vec(0.1f64..10.0, 40),
        bump in prop::collection::vec(0.0f64..5.0, 40),
        r0 in 0.55f64..0.95,
    ) {
        let grid = LogPolarGrid::graded(0.05, 4.0, 40, 1.05).unwrap();
        let u = ConformalState::new(grid.clone(), base.clone(), 1.0).unwrap();
        let v = ConformalState::new(grid.clone(), base.iter().zip(&bump).map(|(a, b)| a + b).collect(), 1.0).unwrap();
        prop_assert!(disc_area(&u, r0).unwrap() <= disc_area(&v, r0).unwrap());
        prop_assert!(annulus_area(&u, 0.1, 2.0).unwrap() <= annulus_area(&v, 0.1, 2.0).unwrap());
        let spec = CutoffSpec::from_s(0.6, 0.1, 0.25).unwrap();
        prop_assert!(weighted_area(&u, &spec).unwrap() <= weighted_area(&v, &spec).unwrap());
    }

    #[test]
    fn curvature_scales_inversely(c in 0.01f64..100.0, t in 0.1f64..5.0) {
        let grid = LogPolarGrid::uniform(0.3, 6.0, 200).unwrap();
        for model in [ModelSolution::BigBang, ModelSolution::Cusp, ModelSolution::Poincare] {
            let st = model.state(&grid, t).unwrap();
            let scaled = ConformalState::new(grid.clone(), st.values().iter().map(|u| c * u).collect(), t).unwrap();
            // second differences of log U carry roundoff ~ ε|log U|/h², relative to U ~ e^{−2s}
            for (k, ks) in gauss_curvature(&st).unwrap().iter().zip(gauss_curvature(&scaled).unwrap()) {
                prop_assert!((ks * c - k).abs() <= 1e-6 * k.abs().max(1.0), "{k} vs {}", ks * c);
            }
        }
    }

    #[test]
    fn cutoff_shape(s0 in 0.05f64..0.69, frac in 0.01f64..0.33, x in 0.0f64..3.0, y in 0.0f64..3.0) {
        let spec = CutoffSpec::from_s(s0, frac * s0, 0.25).unwrap();
        let s = x * s0;
        let phi = spec.phi(s);
        prop_assert!((0.0..=1.0).contains(&phi));
        if s <= spec.s_inner() {
            prop_assert_eq!(phi, 0.0);
        }
        if s >= s0 {
            prop_assert_eq!(phi, 1.0);
        }
        if s > 0.5 * s0 && s < s0 {
            prop_assert!(spec.phi_second(s) <= 0.0);
        }
        let other = y * s0;
        prop_assert!((spec.phi(s.max(other)) - spec.phi(s.min(other))) >= 0.0);
        // C¹: the derivative has no jump at the kinks
        for k in spec.kinks() {
            let h = 1e-9 * s0;
            prop_assert!((spec.phi_prime(k + h) - spec.phi_prime(k - h)).abs() <= 1e-6 * spec.phi_prime(s0 * 0.75).abs().max(1.0));
        }
    }

    #[test]
    fn bracket_lower_bounds(a in 1e-4f64..0.9, t in 1e-6f64..1.0) {
        let sigma = a + t * (1.0 - a);
        let b = bracket(a, sigma);
        prop_assert!(b >= (sigma - a).powi(2) / (2.0 * sigma) * (1.0 - 1e-12));
        if sigma >= std::f64::consts::E.powi(2) * a {
            prop_assert!(b >= 0.5 * sigma * (sigma / a).ln() * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn q_is_stable_under_tolerance_halving(r0 in 0.55f64..0.95, frac in 0.05f64..0.999, gamma in 0.05f64..0.45) {
        let lower = r0.cbrt();
        let spec = CutoffSpec::new(r0, lower + frac * (1.0 - lower), gamma).unwrap();
        let q = compute_q(&spec).unwrap();
        let opts = QuadOptions::default();
        let tighter = compute_q_with(&spec, QuadOptions { abs_tol: 0.5 * opts.abs_tol, rel_tol: 0.5 * opts.rel_tol, ..opts }).unwrap();
        prop_assert!((q.q - tighter.q).abs() <= q.error + tighter.error + 4.0 * f64::EPSILON * q.q);
    }

    #[test]
    fn solver_is_positive_and_order_preserving(
        amp in 0.0f64..2.0,
        centre in 0.5f64..4.0,
        k_lo in 2.0f64..200.0,
        k_factor in 1.0f64..50.0,
    ) {
        let g = small_grid();
        let lo = ModelSolution::FlatDisc.state(&g, 0.0).unwrap();
        let hi = bumped_flat(&g, amp, centre);
        let config = geometric_config(0.05);
        let a = evolve(&lo, &BoundarySchedule::ramp(&lo, k_lo), &config, 0.05).unwrap();
        let b = evolve(&hi, &BoundarySchedule::ramp(&lo, k_lo * k_factor), &config, 0.05).unwrap();
        for traj in [&a, &b] {
            for k in 0..traj.len() {
                prop_assert!(traj.values(k).iter().all(|&u| u > 0.0 && u.is_finite()));
            }
        }
        let order = check_order_preservation(&a, &b, 1e-9).unwrap();
        prop_assert!(order.ordered, "{order:?}");
        for rec in lower_barrier_check(&a).iter().chain(&lower_barrier_check(&b)) {
            prop_assert!(rec.margin >= -1e-8, "{rec:?}");
        }
    }

    #[test]
    fn ordered_pair_estimates(k_lo in 2.0f64..100.0, k_factor in 1.5f64..100.0, gamma in 0.05f64..0.45) {
        let spec = CutoffSpec::new(0.75, 0.95, gamma).unwrap();
        let g = LogPolarGrid::graded(0.25 * spec.s_inner(), 8.0, 300, 1.015).unwrap();
        let flat = ModelSolution::FlatDisc.state(&g, 0.0).unwrap();
        let config = geometric_config(0.05);
        let a = evolve(&flat, &BoundarySchedule::ramp(&flat, k_lo), &config, 0.05).unwrap();
        let b = evolve(&flat, &BoundarySchedule::ramp(&flat, k_lo * k_factor), &config, 0.05).unwrap();
        let opts = EstimateOptions::default();
        for &t in a.times() {
            let j = compute_j(&a, &b, &spec, t, JVariant::Ordered).unwrap();
            prop_assert!(j >= 0.0);
            let k = a.index_of(t).unwrap();
            let diff = disc_area(&b.state(k), 0.75).unwrap() - disc_area(&a.state(k), 0.75).unwrap();
            prop_assert!(diff <= j * (1.0 + 1e-12) + 1e-14, "t = {t}: {diff} > {j}");
            prop_assert!(scalar_log_inequality_check(&a, &b, gamma, t, &opts).unwrap().holds());
            prop_assert!(holder_step_check(&a, &b, &spec, t).unwrap().holds_within(1e-14));
        }
    }
}

#[test]
fn trajectories_on_different_grids_are_rejected() {
    let a = Trajectory::from_model(ModelSolution::BigBang, &small_grid(), &[1.0]).unwrap();
    let b = Trajectory::from_model(ModelSolution::Cusp, &small_grid().refined(), &[1.0]).unwrap();
    assert!(check_order_preservation(&a, &b, 1e-9).is_err());
}
