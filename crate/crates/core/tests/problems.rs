use proptest::prelude::*;

use safezo::barrier::BarrierGeometry;
use safezo::linalg::{central_difference, norm2};
use safezo::problems::{
    self, check_constants, disk_barrier_minimizer, disk_kkt_point, grid_reference, DomainError,
    GridTarget, TurningModel,
};

fn assert_gradient_close(analytic: &[f64], fd: &[f64]) -> Result<(), TestCaseError> {
    let scale = norm2(analytic).max(1.0);
    for (a, f) in analytic.iter().zip(fd) {
        prop_assert!((a - f).abs() <= 1e-6 * scale, "{a} vs {f}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_instance_gradients_match_finite_differences(
        seed in 0u64..10_000,
        d in 1usize..6,
        m in 1usize..4,
        x in prop::collection::vec(-0.9f64..0.9, 5),
    ) {
        let p = problems::random_instance(d, m, seed, 3.0, 4.0).unwrap();
        let x = &x[..d];
        for i in 0..=p.constraint_count() {
            let f = p.function(i);
            let fd = central_difference(|y| f.value(y), x, 1e-6);
            assert_gradient_close(&f.gradient(x).unwrap(), &fd)?;
        }
    }

    #[test]
    fn turning_gradients_match_finite_differences(v in 0.1f64..0.2, f in 0.08f64..0.16) {
        let p = problems::turning();
        for i in 0..=p.constraint_count() {
            let func = p.function(i);
            let fd = central_difference(|y| func.value(y), &[v, f], 1e-7);
            let g = func.gradient(&[v, f]).unwrap();
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "f{i}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn stated_constants_hold_on_random_and_analytic_problems() {
    let mut all = vec![problems::linear_1d(), problems::disk_quadratic()];
    for seed in 0..5 {
        all.push(problems::random_instance(3, 2, seed, 2.0, 3.0).unwrap());
    }
    for p in &all {
        let check = check_constants(p, 10_000, 1).unwrap();
        assert_eq!(check.samples, 10_000);
        assert!(check.is_valid(), "{}: {:?}", p.name, check.warnings());
    }
}

#[test]
fn turning_constants_are_checked_not_assumed() {
    let check = check_constants(&problems::turning(), 2000, 0).unwrap();
    // The box constraints have unit gradients.
    assert!(check.functions[2..]
        .iter()
        .all(|f| f.lipschitz_ok() && f.smoothness_ok()));
    // The cost curvature in rescaled speed is far above M = 5.
    assert!(!check.warnings().is_empty());
}

#[test]
fn closed_form_solutions() {
    let p = problems::linear_1d();
    for eta in [0.3, 0.05] {
        assert!(norm2(&p.barrier_gradient(&[eta], eta)) < 1e-12);
    }
    let p = problems::disk_quadratic();
    let (x, lambda) = disk_kkt_point();
    let mut g = p.reference_gradient(&x, 0);
    for (a, b) in g.iter_mut().zip(p.reference_gradient(&x, 1)) {
        *a += lambda * b;
    }
    assert!(norm2(&g) < 1e-8);
    assert!(p.value(&x, 1).abs() < 1e-12);
    for eta in [0.5, 0.1, 0.01] {
        let xb = disk_barrier_minimizer(eta);
        assert!(norm2(&p.barrier_gradient(&xb, eta)) < 1e-8);
    }
}

#[test]
fn grid_minimizers_are_consistent_with_local_smoothness() {
    let cases = [
        (problems::linear_1d(), 0.1, 1e-3),
        (problems::disk_quadratic(), 0.2, 1e-2),
        (problems::disk_quadratic(), 0.05, 1e-2),
    ];
    for (p, eta, h) in cases {
        let r = grid_reference(&p, GridTarget::Barrier(eta), h).unwrap();
        let geometry = BarrierGeometry::from_problem(&p);
        let l2 = geometry
            .local_smoothness(&p.constraint_values(&r.point), eta)
            .unwrap();
        let grad = norm2(&p.barrier_gradient(&r.point, eta));
        let bound = l2 * r.final_resolution() * (p.dimension as f64).sqrt();
        assert!(grad <= bound, "{}: {grad} > {bound}", p.name);
        assert!(r.levels.windows(2).all(|w| w[1].value < w[0].value));
    }
}

#[test]
fn grid_objective_approaches_the_kkt_point() {
    let p = problems::disk_quadratic();
    let r = grid_reference(&p, GridTarget::Objective, 1e-2).unwrap();
    let (x, _) = disk_kkt_point();
    assert!(safezo::linalg::distance(&r.point, &x) < 1e-2);
}

#[test]
fn grid_rejects_unsupported_problems() {
    let p = problems::random_instance(4, 1, 0, 1.0, 2.0).unwrap();
    assert!(matches!(
        grid_reference(&p, GridTarget::Objective, 0.1),
        Err(DomainError::GridTooLarge { .. })
    ));
    let p = problems::linear_1d();
    assert!(grid_reference(&p, GridTarget::Objective, 0.0).is_err());
}

#[test]
fn turning_overrides_flow_into_the_problem() {
    let model = TurningModel {
        geometry: 2.0,
        ..TurningModel::default()
    };
    let a = model.problem();
    let b = problems::turning();
    let x = [0.15, 0.09];
    assert!((a.objective.value(&x) - 2.0 * b.objective.value(&x)).abs() < 1e-12);
}
