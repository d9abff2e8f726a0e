//! Forward finite-difference gradient estimators and confidence bounds.
//!
//! With exact values the estimator of `grad f(x)` is
//! `G_j = (f(x + nu e_j) - f(x)) / nu`, whose error is at most
//! `sqrt(d) nu M / 2` for an M-smooth `f`. With noisy values each of the
//! `d + 1` points is measured `n` times and the single-shot estimators are
//! averaged. The center-point samples double as the data for an upper
//! confidence bound on the function value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::Oracle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("finite-difference radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("replicate count must be at least 1")]
    ZeroReplicates,
    #[error("confidence level delta must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("smoothness constant must be positive, got {0}")]
    NonPositiveSmoothness(f64),
    #[error("noise parameter sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("no samples supplied")]
    EmptySamples,
    #[error("function index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
}

/// Confidence attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    /// Deterministic bound (exact oracle).
    Exact,
    /// Bound holds with probability at least `1 - delta`.
    Level(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    pub radius: f64,
    pub replicates: u64,
    /// Bound on `||G - grad f||_2`.
    pub deviation_bound: f64,
    pub confidence: Confidence,
}

/// Upper confidence bound `mean + sigma sqrt(ln(1/delta)) / sqrt(n)`, with
/// `[upper - half_width, upper]` covering the true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBound {
    pub upper: f64,
    pub half_width: f64,
    pub replicates: u64,
    pub confidence: Confidence,
}

impl ConfidenceBound {
    pub fn lower(&self) -> f64 {
        self.upper - self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper
    }
}

/// Sample mean of the replicates taken at the center point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterSamples {
    pub mean: f64,
    pub replicates: u64,
}

/// Everything learned from one round of `(d + 1) * n` oracle calls around `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub radius: f64,
    pub replicates: u64,
    /// Sample means at `x` for `f_0..f_m`.
    pub center: Vec<f64>,
    /// Gradient estimates for `f_0..f_m`.
    pub gradients: Vec<GradientEstimate>,
}

fn check_radius(nu: f64) -> Result<(), EstimatorError> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(EstimatorError::NonPositiveRadius(nu))
    }
}

fn check_delta(delta: f64) -> Result<(), EstimatorError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::InvalidConfidence(delta))
    }
}

/// Deterministic bias bound `sqrt(d) nu M / 2` of the forward difference.
pub fn bias_bound(d: usize, nu: f64, m: f64) -> f64 {
    (d as f64).sqrt() * nu * m / 2.0
}

/// High-probability deviation bound of the averaged estimator:
/// `sqrt(d nu^2 M^2 / 4 + 2 d sigma^2 ln(1/delta) / (n nu^2))`.
///
/// When `n` reaches [`batch_size`] the bound collapses to `sqrt(d) nu M`,
/// which is what is reported in that case.
pub fn deviation_bound(d: usize, nu: f64, m: f64, sigma: f64, delta: f64, n: u64) -> f64 {
    if sigma == 0.0 {
        return bias_bound(d, nu, m);
    }
    let required = batch_size(nu, sigma, delta, m).unwrap_or(u64::MAX);
    if n >= required {
        return (d as f64).sqrt() * nu * m;
    }
    let d = d as f64;
    (d * nu * nu * m * m / 4.0
        + 2.0 * d * sigma * sigma * (1.0 / delta).ln() / (n as f64 * nu * nu))
        .sqrt()
}

/// Replicates per point balancing bias and noise:
/// `max(1, ceil(8 sigma^2 ln(1/delta) / (3 nu^4 M^2)))`, saturating at `u64::MAX`.
pub fn batch_size(nu: f64, sigma: f64, delta: f64, m: f64) -> Result<u64, EstimatorError> {
    check_radius(nu)?;
    check_delta(delta)?;
    if !(m > 0.0) {
        return Err(EstimatorError::NonPositiveSmoothness(m));
    }
    if !(sigma >= 0.0) {
        return Err(EstimatorError::NegativeSigma(sigma));
    }
    let n = 8.0 * sigma * sigma * (1.0 / delta).ln() / (3.0 * nu.powi(4) * m * m);
    // Guard against 1228.0000000001 style round-up from floating error.
    let n = (n * (1.0 - 1e-12)).ceil();
    Ok(if n.is_nan() || n <= 1.0 {
        1
    } else if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    })
}

/// Upper confidence bound from raw samples.
pub fn ucb(samples: &[f64], sigma: f64, delta: f64) -> Result<ConfidenceBound, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptySamples);
    }
    // Shifted mean: exact when all samples agree.
    let first = samples[0];
    let mean = first + samples.iter().map(|v| v - first).sum::<f64>() / samples.len() as f64;
    ucb_from_mean(mean, samples.len() as u64, sigma, delta)
}

/// Upper confidence bound from a sample mean over `n` replicates.
pub fn ucb_from_mean(
    mean: f64,
    n: u64,
    sigma: f64,
    delta: f64,
) -> Result<ConfidenceBound, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::EmptySamples);
    }
    check_delta(delta)?;
    if !(sigma >= 0.0) {
        return Err(EstimatorError::NegativeSigma(sigma));
    }
    let b = sigma * (1.0 / delta).ln().sqrt() / (n as f64).sqrt();
    Ok(ConfidenceBound {
        upper: mean + b,
        half_width: 2.0 * b,
        replicates: n,
        confidence: Confidence::Level(delta),
    })
}

/// Measures every function `n` times at `x` and returns the sample means.
pub fn measure_center(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    n: u64,
    noisy: bool,
) -> Result<Vec<f64>, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::ZeroReplicates);
    }
    let mut center = vec![0.0; oracle.problem().constraint_count() + 1];
    oracle.sample_all(x, 0, n, noisy, &mut center);
    Ok(center)
}

/// Measures every function at `x` and `x + nu e_j`, `n` times each, and
/// returns the averaged forward-difference gradients.
///
/// Performs exactly `(d + 1) * n` oracle calls, tagged probe 0 (center)
/// then 1..=d. `noise_bound` is `Some((sigma, delta))` for a noisy oracle,
/// which switches the attached deviation bounds to the high-probability form.
pub fn probe(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    nu: f64,
    n: u64,
    noise_bound: Option<(f64, f64)>,
) -> Result<ProbeSet, EstimatorError> {
    check_radius(nu)?;
    if let Some((_, delta)) = noise_bound {
        check_delta(delta)?;
    }
    let center = measure_center(oracle, x, n, noise_bound.is_some())?;
    probe_from_center(oracle, x, center, nu, n, noise_bound)
}

/// Completes a probe whose center means were already taken with `n`
/// replicates: `d * n` further calls at `x + nu e_j`.
pub fn probe_from_center(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    center: Vec<f64>,
    nu: f64,
    n: u64,
    noise_bound: Option<(f64, f64)>,
) -> Result<ProbeSet, EstimatorError> {
    check_radius(nu)?;
    if n == 0 {
        return Err(EstimatorError::ZeroReplicates);
    }
    if let Some((_, delta)) = noise_bound {
        check_delta(delta)?;
    }
    let problem = oracle.problem();
    let d = problem.dimension;
    let count = problem.constraint_count() + 1;
    let noisy = noise_bound.is_some();

    let mut gradients = vec![vec![0.0; d]; count];
    let mut shifted = x.to_vec();
    let mut means = vec![0.0; count];
    for j in 0..d {
        shifted[j] = x[j] + nu;
        oracle.sample_all(&shifted, j + 1, n, noisy, &mut means);
        shifted[j] = x[j];
        for (i, g) in gradients.iter_mut().enumerate() {
            g[j] = (means[i] - center[i]) / nu;
        }
    }

    let gradients = gradients
        .into_iter()
        .enumerate()
        .map(|(i, gradient)| {
            let m = problem.function_smoothness(i);
            let exact = !noisy || problem.is_known_exactly(i);
            let (deviation_bound, confidence) = match noise_bound {
                Some((sigma, delta)) if !exact => (
                    deviation_bound(d, nu, m, sigma, delta, n),
                    Confidence::Level(delta),
                ),
                _ => (bias_bound(d, nu, m), Confidence::Exact),
            };
            GradientEstimate {
                gradient,
                radius: nu,
                replicates: n,
                deviation_bound,
                confidence,
            }
        })
        .collect();

    Ok(ProbeSet {
        radius: nu,
        replicates: n,
        center,
        gradients,
    })
}

fn single_function(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    i: usize,
    nu: f64,
    n: u64,
    noisy: bool,
) -> Result<(Vec<f64>, f64), EstimatorError> {
    check_radius(nu)?;
    if n == 0 {
        return Err(EstimatorError::ZeroReplicates);
    }
    let max = oracle.problem().constraint_count();
    if i > max {
        return Err(EstimatorError::IndexOutOfRange { index: i, max });
    }
    let center = oracle.sample_one(x, 0, i, n, noisy);
    let mut shifted = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for j in 0..x.len() {
        shifted[j] = x[j] + nu;
        g[j] = (oracle.sample_one(&shifted, j + 1, i, n, noisy) - center) / nu;
        shifted[j] = x[j];
    }
    Ok((g, center))
}

/// Exact-oracle estimate of `grad f_i(x)` from `d + 1` calls.
///
/// The caller must ensure every probe `x + nu e_j` is feasible.
pub fn grad_exact(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    i: usize,
    nu: f64,
) -> Result<GradientEstimate, EstimatorError> {
    let (gradient, _) = single_function(oracle, x, i, nu, 1, false)?;
    let m = oracle.problem().function_smoothness(i);
    Ok(GradientEstimate {
        gradient,
        radius: nu,
        replicates: 1,
        deviation_bound: bias_bound(x.len(), nu, m),
        confidence: Confidence::Exact,
    })
}

/// Noisy-oracle estimate of `grad f_i(x)` averaged over `n` replicates,
/// from `(d + 1) * n` calls. Also returns the center samples for a UCB.
pub fn grad_noisy(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    i: usize,
    nu: f64,
    n: u64,
    delta: f64,
) -> Result<(GradientEstimate, CenterSamples), EstimatorError> {
    check_delta(delta)?;
    let (gradient, mean) = single_function(oracle, x, i, nu, n, true)?;
    let problem = oracle.problem();
    let m = problem.function_smoothness(i);
    let sigma = oracle.noise_model().sigma;
    let (deviation_bound, confidence) = if problem.is_known_exactly(i) {
        (bias_bound(x.len(), nu, m), Confidence::Exact)
    } else {
        (
            deviation_bound(x.len(), nu, m, sigma, delta, n),
            Confidence::Level(delta),
        )
    };
    Ok((
        GradientEstimate {
            gradient,
            radius: nu,
            replicates: n,
            deviation_bound,
            confidence,
        },
        CenterSamples {
            mean,
            replicates: n,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance, norm2};
    use crate::oracle::{Constraint, LedgerMode, NoiseModel, ProblemSpec, SmoothFunction};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn with_objective<F>(d: usize, f: F, m: f64) -> ProblemSpec
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ProblemSpec::new(
            "test",
            SmoothFunction::new("f", f),
            vec![Constraint::new(SmoothFunction::new(
                "slack",
                |_: &[f64]| -1.0,
            ))],
            m,
            1.0,
            vec![0.0; d],
        )
        .unwrap()
    }

    #[test]
    fn affine_functions_are_exact() {
        let a = [0.3, -1.2, 2.0];
        let p = with_objective(
            3,
            move |x: &[f64]| 4.0 + a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>(),
            1.0,
        );
        let mut o = Oracle::exact(&p);
        let g = grad_exact(&mut o, &[0.5, 0.1, -0.7], 0, 0.1).unwrap();
        for (u, v) in g.gradient.iter().zip(&a) {
            assert_relative_eq!(*u, *v, epsilon = 1e-12);
        }
        assert_eq!(o.measurements(), 4);
    }

    #[test]
    fn quadratic_bias_attains_the_bound() {
        let p = with_objective(2, |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]), 1.0);
        let mut o = Oracle::exact(&p);
        let g = grad_exact(&mut o, &[0.0, 0.0], 0, 0.1).unwrap();
        assert_relative_eq!(g.gradient[0], 0.05, epsilon = 1e-12);
        assert_relative_eq!(g.gradient[1], 0.05, epsilon = 1e-12);
        let err = norm2(&g.gradient);
        assert_relative_eq!(err, 0.05 * 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(g.deviation_bound, err, epsilon = 1e-12);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let p = with_objective(2, |_: &[f64]| 3.0, 1.0);
        let mut o = Oracle::exact(&p);
        let g = grad_exact(&mut o, &[1.0, 2.0], 0, 0.37).unwrap();
        assert_eq!(g.gradient, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_radius_and_replicates() {
        let p = with_objective(1, |x: &[f64]| x[0], 1.0);
        let mut o = Oracle::exact(&p);
        assert_eq!(
            grad_exact(&mut o, &[0.0], 0, 0.0).unwrap_err(),
            EstimatorError::NonPositiveRadius(0.0)
        );
        assert_eq!(
            grad_noisy(&mut o, &[0.0], 0, 0.1, 0, 0.1).unwrap_err(),
            EstimatorError::ZeroReplicates
        );
        assert!(matches!(
            grad_exact(&mut o, &[0.0], 5, 0.1),
            Err(EstimatorError::IndexOutOfRange { .. })
        ));
        assert_eq!(o.measurements(), 0);
    }

    #[test]
    fn noisy_with_zero_sigma_matches_exact() {
        let p = with_objective(2, |x: &[f64]| x[0].sin() + x[1] * x[1], 1.0);
        let mut a = Oracle::exact(&p);
        let mut b = Oracle::new(&p, NoiseModel::gaussian(0.0, 9), LedgerMode::Batched);
        let x = [0.3, -0.4];
        let exact = grad_exact(&mut a, &x, 0, 0.01).unwrap();
        let (noisy, center) = grad_noisy(&mut b, &x, 0, 0.01, 5, 0.1).unwrap();
        assert_eq!(exact.gradient, noisy.gradient);
        assert_eq!(center.mean, p.value(&x, 0));
        assert_eq!(b.measurements(), 15);
    }

    #[test]
    fn forced_noise_draws() {
        // Center draw 0, probe draw +c on f = 0, d = 1, n = 1.
        let p = with_objective(1, |_: &[f64]| 0.0, 1.0);
        let mut o = Oracle::new(
            &p,
            NoiseModel::scripted(vec![0.0, 0.25]),
            LedgerMode::PerMeasurement,
        );
        let (g, _) = grad_noisy(&mut o, &[0.0], 0, 0.5, 1, 0.1).unwrap();
        assert_relative_eq!(g.gradient[0], 0.25 / 0.5);
    }

    #[test]
    fn batch_size_examples() {
        assert_eq!(batch_size(0.1, 0.0, 0.01, 5.0).unwrap(), 1);
        assert_eq!(batch_size(0.014142, 0.01, 0.01, 5.0).unwrap(), 1229);
        assert_eq!(batch_size(1.0, 1.0, (-1f64).exp(), 1.0).unwrap(), 3);
        assert_eq!(
            batch_size(1.0, 1.0, 1.0, 1.0).unwrap_err(),
            EstimatorError::InvalidConfidence(1.0)
        );
        assert_eq!(
            batch_size(1.0, 1.0, 0.0, 1.0).unwrap_err(),
            EstimatorError::InvalidConfidence(0.0)
        );
        assert_eq!(batch_size(1e-30, 1.0, 0.1, 1.0).unwrap(), u64::MAX);
    }

    #[test]
    fn ucb_examples() {
        let b = ucb(&[0.7; 4], 0.0, 0.2).unwrap();
        assert_eq!(b.upper, 0.7);
        assert_eq!(b.half_width, 0.0);

        let b = ucb_from_mean(0.5, 100, 0.01, 0.01).unwrap();
        assert_relative_eq!(b.upper, 0.502146, epsilon = 1e-6);
        assert_relative_eq!(b.half_width, 0.004292, epsilon = 1e-6);

        assert_eq!(
            ucb(&[], 0.1, 0.1).unwrap_err(),
            EstimatorError::EmptySamples
        );
    }

    #[test]
    fn deviation_bound_forms() {
        assert_relative_eq!(
            deviation_bound(4, 0.1, 2.0, 0.0, 0.1, 1),
            0.1 * 2.0 * 2.0 / 2.0
        );
        let n = batch_size(0.05, 0.02, 0.05, 3.0).unwrap();
        assert_relative_eq!(
            deviation_bound(2, 0.05, 3.0, 0.02, 0.05, n),
            2f64.sqrt() * 0.05 * 3.0
        );
        // Fewer replicates than required widen the bound.
        assert!(deviation_bound(2, 0.05, 3.0, 0.02, 0.05, n / 4) > 2f64.sqrt() * 0.05 * 3.0);
    }

    #[test]
    fn probe_accounts_all_functions_at_once() {
        let p = with_objective(3, |x: &[f64]| x[0] * x[1] + x[2], 1.0);
        let mut o = Oracle::new(&p, NoiseModel::gaussian(0.1, 1), LedgerMode::Batched);
        let set = probe(&mut o, &[0.1, 0.2, 0.3], 0.01, 7, Some((0.1, 0.05))).unwrap();
        assert_eq!(o.measurements(), 4 * 7);
        assert_eq!(set.gradients.len(), 2);
        // The constraint is constant but noisy: its estimate carries a confidence level.
        assert_eq!(set.gradients[1].confidence, Confidence::Level(0.05));
    }

    proptest! {
        #[test]
        fn batch_size_is_monotone(
            nu in 1e-3f64..1.0,
            scale in 1.0f64..4.0,
            sigma in 0.0f64..1.0,
            delta in 1e-3f64..0.5,
            m in 0.1f64..10.0,
        ) {
            let n = batch_size(nu, sigma, delta, m).unwrap();
            prop_assert!(batch_size(nu * scale, sigma, delta, m).unwrap() <= n);
            prop_assert!(batch_size(nu, sigma, (delta * scale).min(0.99), m).unwrap() <= n);
            prop_assert!(batch_size(nu, sigma * scale, delta, m).unwrap() >= n);
        }

        #[test]
        fn exact_bias_bound_holds_on_quadratics(
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
            x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, nu in 1e-4f64..1.0,
        ) {
            // f = 0.5 x^T H x with H = [[a, c], [c, b]]; M = spectral norm of H.
            let m = {
                let mean = (a + b) / 2.0;
                let r = (((a - b) / 2.0).powi(2) + c * c).sqrt();
                (mean.abs() + r).max(1e-9)
            };
            let p = with_objective(2, move |x: &[f64]| 0.5 * (a * x[0] * x[0] + 2.0 * c * x[0] * x[1] + b * x[1] * x[1]), m);
            let mut o = Oracle::exact(&p);
            let x = [x0, x1];
            let g = grad_exact(&mut o, &x, 0, nu).unwrap();
            let truth = [a * x0 + c * x1, c * x0 + b * x1];
            prop_assert!(distance(&g.gradient, &truth) <= g.deviation_bound * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn exact_estimate_converges_linearly_in_radius() {
        let p = with_objective(2, |x: &[f64]| x[0].exp() + x[0] * x[1] * x[1], 10.0);
        let x = [0.2, 0.5];
        let truth = [0.2f64.exp() + 0.25, 2.0 * 0.2 * 0.5];
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|nu| {
                let mut o = Oracle::exact(&p);
                distance(&grad_exact(&mut o, &x, 0, *nu).unwrap().gradient, &truth)
            })
            .collect();
        assert!(
            errs[1] < errs[0] / 5.0 && errs[2] < errs[1] / 5.0,
            "{errs:?}"
        );
    }
}
