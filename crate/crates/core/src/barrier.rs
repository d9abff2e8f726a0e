//! Log-barrier quantities.
//!
//! `B_eta(x) = f_0(x) - eta * sum_i ln(-f_i(x))` is finite only in the
//! interior of the feasible set. The functions here take constraint values
//! as input, which are true values with an exact oracle and upper
//! confidence bounds with a noisy one.
//!
//! The scalar functions ([`local_smoothness`], [`probe_radius`],
//! [`step_size`]) use one Lipschitz constant `L` and one smoothness `M` for
//! every constraint. [`BarrierGeometry`] generalizes them to per-constraint
//! constants and reduces to the scalar forms when all constants agree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, norm_inf};
use crate::oracle::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("constraint {index} value {value} is not strictly negative; the barrier is undefined")]
    NotInterior { index: usize, value: f64 },
    #[error("slack must be positive, got {0}")]
    NonPositiveSlack(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("expected {expected} constraint gradients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

fn check_interior(values: &[f64]) -> Result<(), BarrierError> {
    for (k, v) in values.iter().enumerate() {
        if !(*v < 0.0) {
            return Err(BarrierError::NotInterior {
                index: k + 1,
                value: *v,
            });
        }
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<(), BarrierError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(BarrierError::NonPositive { name, value })
    }
}

/// `f_0 - eta * sum ln(-f_i)`.
pub fn barrier_value(objective: f64, constraints: &[f64], eta: f64) -> Result<f64, BarrierError> {
    check_interior(constraints)?;
    Ok(objective - eta * constraints.iter().map(|v| (-v).ln()).sum::<f64>())
}

/// `G_0 + eta * sum G_i / (-v_i)`.
pub fn barrier_gradient(
    objective: &[f64],
    constraints: &[&[f64]],
    values: &[f64],
    eta: f64,
) -> Result<Vec<f64>, BarrierError> {
    if constraints.len() != values.len() {
        return Err(BarrierError::LengthMismatch {
            expected: values.len(),
            got: constraints.len(),
        });
    }
    check_interior(values)?;
    let mut g = objective.to_vec();
    for (gi, v) in constraints.iter().zip(values) {
        axpy(eta / (-v), gi, &mut g);
    }
    Ok(g)
}

/// `M + sum [2 eta M / (-v_i) + 4 eta L^2 / v_i^2]`.
pub fn local_smoothness(values: &[f64], eta: f64, m: f64, l: f64) -> Result<f64, BarrierError> {
    check_interior(values)?;
    Ok(m + values
        .iter()
        .map(|v| {
            let s = -v;
            2.0 * eta * m / s + 4.0 * eta * l * l / (s * s)
        })
        .sum::<f64>())
}

/// `min(eta / (sqrt(d) M), slack / max(L, m sqrt(d) M))`.
pub fn probe_radius(
    eta: f64,
    d: usize,
    m: f64,
    l: f64,
    constraints: usize,
    slack: f64,
) -> Result<f64, BarrierError> {
    if !(slack > 0.0) {
        return Err(BarrierError::NonPositiveSlack(slack));
    }
    check_positive("eta", eta)?;
    check_positive("M", m)?;
    check_positive("L", l)?;
    let sd = (d as f64).sqrt();
    Ok((eta / (sd * m)).min(slack / l.max(constraints as f64 * sd * m)))
}

/// Probe radius from UCB slack: the second branch is halved so that probes
/// around the next iterate remain feasible whenever the bound holds.
pub fn probe_radius_ucb(
    eta: f64,
    d: usize,
    m: f64,
    l: f64,
    constraints: usize,
    slack_ucb: f64,
) -> Result<f64, BarrierError> {
    if !(slack_ucb > 0.0) {
        return Err(BarrierError::NonPositiveSlack(slack_ucb));
    }
    check_positive("eta", eta)?;
    check_positive("M", m)?;
    check_positive("L", l)?;
    let sd = (d as f64).sqrt();
    Ok((eta / (sd * m)).min(slack_ucb / (2.0 * l.max(constraints as f64 * sd * m))))
}

/// `min(slack / (2 L ||g||), 1 / L2)`, and `1 / L2` when `g = 0`.
pub fn step_size(slack: f64, l: f64, gnorm: f64, l2: f64) -> Result<f64, BarrierError> {
    if !(slack > 0.0) {
        return Err(BarrierError::NonPositiveSlack(slack));
    }
    check_positive("L2", l2)?;
    check_positive("L", l)?;
    let smooth = 1.0 / l2;
    if gnorm == 0.0 {
        return Ok(smooth);
    }
    Ok((slack / (2.0 * l * gnorm)).min(smooth))
}

/// Per-constraint constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConstants {
    pub lipschitz: f64,
    pub smoothness: f64,
    /// Values of this constraint are measured without noise.
    pub exact: bool,
}

/// Barrier constants of a problem, one entry per constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierGeometry {
    pub dimension: usize,
    pub smoothness: f64,
    pub lipschitz: f64,
    pub constraints: Vec<ConstraintConstants>,
}

impl BarrierGeometry {
    pub fn from_problem(problem: &ProblemSpec) -> Self {
        Self {
            dimension: problem.dimension,
            smoothness: problem.smoothness,
            lipschitz: problem.lipschitz,
            constraints: (1..=problem.constraint_count())
                .map(|i| ConstraintConstants {
                    lipschitz: problem.constraint_lipschitz(i),
                    smoothness: problem.constraint_smoothness(i),
                    exact: problem.is_known_exactly(i),
                })
                .collect(),
        }
    }

    /// Uniform constants, as in the scalar functions.
    pub fn uniform(dimension: usize, constraints: usize, smoothness: f64, lipschitz: f64) -> Self {
        Self {
            dimension,
            smoothness,
            lipschitz,
            constraints: vec![
                ConstraintConstants {
                    lipschitz,
                    smoothness,
                    exact: false,
                };
                constraints
            ],
        }
    }

    /// `M + sum [2 eta M_i / (-v_i) + 4 eta L_i^2 / v_i^2]`.
    pub fn local_smoothness(&self, values: &[f64], eta: f64) -> Result<f64, BarrierError> {
        check_interior(values)?;
        Ok(self.smoothness
            + values
                .iter()
                .zip(&self.constraints)
                .map(|(v, c)| {
                    let s = -v;
                    2.0 * eta * c.smoothness / s + 4.0 * eta * c.lipschitz * c.lipschitz / (s * s)
                })
                .sum::<f64>())
    }

    /// Largest probe radius that keeps every probe feasible and the
    /// barrier-gradient bias below `eta`.
    ///
    /// With `ucb = true` the values are upper confidence bounds, possibly
    /// taken at the previous iterate, and every branch that depends on them
    /// is halved.
    pub fn probe_radius(&self, eta: f64, values: &[f64], ucb: bool) -> Result<f64, BarrierError> {
        check_positive("eta", eta)?;
        check_positive("M", self.smoothness)?;
        let slack = min_slack(values);
        if !(slack > 0.0) {
            return Err(BarrierError::NonPositiveSlack(slack));
        }
        let factor = if ucb { 2.0 } else { 1.0 };
        let sd = (self.dimension as f64).sqrt();
        let mut nu = eta / (sd * self.smoothness);
        let mut curved = 0usize;
        let mut curved_slack = f64::INFINITY;
        for (v, c) in values.iter().zip(&self.constraints) {
            let s = -v;
            nu = nu.min(s / (factor * c.lipschitz));
            if c.smoothness > 0.0 {
                curved += 1;
                curved_slack = curved_slack.min(s);
            }
        }
        if curved > 0 {
            nu = nu.min(curved_slack / (factor * curved as f64 * sd * self.smoothness));
        }
        Ok(nu)
    }

    /// `min(min_i (-v_i) / (2 L_i ||g||), 1 / L2)`.
    pub fn step_size(&self, values: &[f64], gnorm: f64, l2: f64) -> Result<f64, BarrierError> {
        check_positive("L2", l2)?;
        let mut gamma = 1.0 / l2;
        if gnorm > 0.0 {
            for (v, c) in values.iter().zip(&self.constraints) {
                let s = -v;
                if !(s > 0.0) {
                    return Err(BarrierError::NonPositiveSlack(s));
                }
                gamma = gamma.min(s / (2.0 * c.lipschitz * gnorm));
            }
        }
        Ok(gamma)
    }
}

/// `min_i (-v_i)`.
pub fn min_slack(values: &[f64]) -> f64 {
    values.iter().fold(f64::INFINITY, |acc, v| acc.min(-v))
}

/// Barrier state at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierState {
    pub eta: f64,
    /// True values (exact oracle) or UCBs (noisy oracle); all negative.
    pub values: Vec<f64>,
    pub slack: f64,
    /// `lambda_i = eta / (-v_i)`.
    pub duals: Vec<f64>,
    pub gradient: Vec<f64>,
    pub smoothness: f64,
}

impl BarrierState {
    pub fn new(
        geometry: &BarrierGeometry,
        eta: f64,
        values: Vec<f64>,
        objective_gradient: &[f64],
        constraint_gradients: &[&[f64]],
    ) -> Result<Self, BarrierError> {
        let gradient = barrier_gradient(objective_gradient, constraint_gradients, &values, eta)?;
        let smoothness = geometry.local_smoothness(&values, eta)?;
        Ok(Self {
            eta,
            slack: min_slack(&values),
            duals: duals(&values, eta),
            values,
            gradient,
            smoothness,
        })
    }

    pub fn dual_norm_inf(&self) -> f64 {
        norm_inf(&self.duals)
    }
}

/// `eta / (-v_i)` for each constraint.
pub fn duals(values: &[f64], eta: f64) -> Vec<f64> {
    values.iter().map(|v| eta / (-v)).collect()
}
