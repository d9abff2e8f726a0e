use serde::{Deserialize, Serialize};

use super::Mode;
use crate::linalg::{axpy, norm2, norm_inf};
use crate::oracle::ProblemSpec;

/// How the ground-truth gradients were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    Analytic,
    CentralDifference,
}

/// Scaled-KKT check of a point with candidate multipliers.
///
/// The point passes when
/// `||grad f_0 + sum lambda_i grad f_i|| <= c eta (1 + ||lambda||_inf)`,
/// `|lambda_i f_i| <= c eta`, `lambda >= 0` and `f_i <= 0`, with `c = 1`
/// for exact oracles and `c = 4` for noisy ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: f64,
    pub factor: f64,
    pub stationarity: f64,
    pub stationarity_threshold: f64,
    pub complementarity: Vec<f64>,
    pub complementarity_threshold: f64,
    pub dual_feasible: bool,
    pub primal_feasible: bool,
    /// `||grad B_eta(x)||` from ground-truth gradients.
    pub barrier_gradient_norm: f64,
    pub gradient_source: GradientSource,
    pub min_slack: Option<f64>,
    pub passed: bool,
}

impl KktReport {
    pub fn stationarity_ok(&self) -> bool {
        self.stationarity <= self.stationarity_threshold * (1.0 + 1e-9)
    }

    pub fn complementarity_ok(&self) -> bool {
        self.complementarity
            .iter()
            .all(|c| *c <= self.complementarity_threshold * (1.0 + 1e-9))
    }
}

/// Certifies `(x, lambda)` against the ground-truth problem.
pub fn certify_kkt(
    problem: &ProblemSpec,
    x: &[f64],
    lambda: &[f64],
    eta: f64,
    mode: Mode,
) -> KktReport {
    let c = mode.kkt_factor();
    let values = problem.constraint_values(x);
    let mut lagrangian = problem.reference_gradient(x, 0);
    for (i, l) in lambda.iter().enumerate() {
        let g = problem.reference_gradient(x, i + 1);
        axpy(*l, &g, &mut lagrangian);
    }
    let stationarity = norm2(&lagrangian);
    let complementarity: Vec<f64> = lambda
        .iter()
        .zip(&values)
        .map(|(l, v)| (l * v).abs())
        .collect();
    let barrier_gradient_norm = norm2(&problem.barrier_gradient(x, eta));
    let mut report = KktReport {
        x: x.to_vec(),
        lambda: lambda.to_vec(),
        eta,
        factor: c,
        stationarity,
        stationarity_threshold: c * eta * (1.0 + norm_inf(lambda)),
        complementarity,
        complementarity_threshold: c * eta,
        dual_feasible: lambda.iter().all(|l| *l >= 0.0),
        primal_feasible: values.iter().all(|v| *v <= 0.0),
        barrier_gradient_norm,
        gradient_source: if problem.has_analytic_gradients() {
            GradientSource::Analytic
        } else {
            GradientSource::CentralDifference
        },
        min_slack: None,
        passed: false,
    };
    report.passed = report.stationarity_ok()
        && report.complementarity_ok()
        && report.dual_feasible
        && report.primal_feasible;
    report
}
