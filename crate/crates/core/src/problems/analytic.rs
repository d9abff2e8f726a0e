//! Small problems with closed-form barrier minimizers and KKT points.

use crate::oracle::{Bounds, Constraint, ProblemSpec, SmoothFunction};

/// `min x` s.t. `-x <= 0`, from `x_0 = 1`. `B_eta` is minimized at `x = eta`.
pub fn linear_1d() -> ProblemSpec {
    let objective = SmoothFunction::new("x", |x: &[f64]| x[0]).with_gradient(|_: &[f64]| vec![1.0]);
    let constraint = Constraint::new(
        SmoothFunction::new("-x", |x: &[f64]| -x[0]).with_gradient(|_: &[f64]| vec![-1.0]),
    )
    .with_smoothness(0.0);
    ProblemSpec::new(
        "linear_1d",
        objective,
        vec![constraint],
        1.0,
        1.0,
        vec![1.0],
    )
    .and_then(|p| p.with_bounds(Bounds::new(vec![0.0], vec![2.0])))
    .expect("valid built-in problem")
}

pub fn linear_1d_barrier_minimizer(eta: f64) -> f64 {
    eta
}

/// `min (x_1 - 2)^2 + (x_2 - 2)^2` s.t. `x_1^2 + x_2^2 <= 1`, from the origin.
pub fn disk_quadratic() -> ProblemSpec {
    let objective = SmoothFunction::new("distance_to_(2,2)", |x: &[f64]| {
        (x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2)
    })
    .with_gradient(|x: &[f64]| vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 2.0)]);
    let constraint = Constraint::new(
        SmoothFunction::new("unit_disk", |x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0)
            .with_gradient(|x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]]),
    );
    ProblemSpec::new(
        "disk_quadratic",
        objective,
        vec![constraint],
        2.0,
        2.0,
        vec![0.0, 0.0],
    )
    .and_then(|p| p.with_bounds(Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0])))
    .expect("valid built-in problem")
}

/// KKT pair of [`disk_quadratic`]: `x = (1, 1)/sqrt 2`, `lambda = 2 sqrt 2 - 1`.
pub fn disk_kkt_point() -> (Vec<f64>, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (vec![s, s], 2.0 * std::f64::consts::SQRT_2 - 1.0)
}

/// Barrier minimizer of [`disk_quadratic`]. By symmetry it lies on the
/// diagonal `(s, s)` where `4 (s - 2) + 4 eta s / (1 - 2 s^2) = 0`.
pub fn disk_barrier_minimizer(eta: f64) -> Vec<f64> {
    let dphi = |s: f64| 4.0 * (s - 2.0) + 4.0 * eta * s / (1.0 - 2.0 * s * s);
    let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_1_SQRT_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if dphi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    vec![s, s]
}

/// Looks up a built-in problem by name.
pub fn by_name(name: &str) -> Option<ProblemSpec> {
    match name {
        "linear_1d" => Some(linear_1d()),
        "disk_quadratic" => Some(disk_quadratic()),
        "turning" => Some(super::turning()),
        _ => None,
    }
}
