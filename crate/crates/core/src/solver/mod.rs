//! Safe log-barrier descent with zeroth-order oracles.
//!
//! One barrier subproblem runs, per iteration `t`:
//!
//! 1. choose the probe radius `nu_t` from the current slack,
//! 2. measure every function at `x_t` and `x_t + nu_t e_j` (`n_t` times each
//!    with a noisy oracle),
//! 3. form the barrier-gradient estimate `g_t` and local smoothness `L2`,
//! 4. step `x_{t+1} = x_t - gamma_t g_t` with
//!    `gamma_t = min(slack / (2 L ||g_t||), 1 / L2)`.
//!
//! With a noisy oracle the constraint values are replaced by upper
//! confidence bounds. Because `n_t` depends on `nu_t`, the radius at `x_t`
//! is computed from the bounds observed at `x_{t-1}`, halved: the step cap
//! guarantees the true slack at least halves per step.
//!
//! [`solve`] anneals `eta` over several rounds, warm-starting each round at
//! the previous round's selected iterate.

mod kkt;

pub use kkt::{certify_kkt, GradientSource, KktReport};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{self, BarrierError, BarrierGeometry};
use crate::estimator::{self, EstimatorError};
use crate::linalg::{axpy, norm2, norm_inf};
use crate::oracle::{
    audit_safety, Ledger, LedgerMode, NoiseKind, NoiseModel, Oracle, ProblemSpec, Violation,
};

/// Oracle kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact function values (0-LBM).
    #[serde(rename = "ezo")]
    Exact,
    /// Noisy function values (s0-LBM).
    #[serde(rename = "szo")]
    Stochastic,
}

impl Mode {
    /// Constant `c` of the scaled-KKT verdict.
    pub fn kkt_factor(self) -> f64 {
        match self {
            Mode::Exact => 1.0,
            Mode::Stochastic => 4.0,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ezo" | "exact" => Ok(Mode::Exact),
            "szo" | "stochastic" | "noisy" => Ok(Mode::Stochastic),
            other => Err(format!("unknown mode `{other}` (expected ezo or szo)")),
        }
    }
}

/// Per-round iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationCap {
    Fixed(usize),
    /// `T = C / eta^3` from [`iteration_budget`], using a lower bound on the
    /// barrier minimum. Without one, the bound is estimated on a grid over
    /// the problem bounds.
    Auto {
        barrier_lower_bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta0: f64,
    /// Annealing factor: `eta_{k+1} = eta_k / mu`.
    pub mu: f64,
    pub rounds: usize,
    pub iterations: IterationCap,
    pub delta: f64,
    pub sigma: f64,
    pub mode: Mode,
    pub seed: u64,
    /// Stop a round once `gamma_t ||g_t||^2` drops to this value.
    pub stop_threshold: f64,
    pub noise_kind: NoiseKind,
    pub ledger_mode: LedgerMode,
    /// Stop a round before a batch would push the total past this count.
    pub max_measurements: Option<u64>,
    /// Upper limit on an automatically computed iteration cap.
    pub max_auto_iterations: usize,
}

impl SolverConfig {
    /// Exact-oracle configuration with one round and an automatic cap.
    pub fn exact(eta0: f64) -> Self {
        Self {
            eta0,
            mu: 5.0,
            rounds: 1,
            iterations: IterationCap::Auto {
                barrier_lower_bound: None,
            },
            delta: 0.01,
            sigma: 0.0,
            mode: Mode::Exact,
            seed: 0,
            stop_threshold: 0.0,
            noise_kind: NoiseKind::Gaussian,
            ledger_mode: LedgerMode::Batched,
            max_measurements: None,
            max_auto_iterations: 10_000_000,
        }
    }

    /// Noisy-oracle configuration with Gaussian noise.
    pub fn stochastic(eta0: f64, sigma: f64, delta: f64) -> Self {
        Self {
            sigma,
            delta,
            mode: Mode::Stochastic,
            ..Self::exact(eta0)
        }
    }

    pub fn with_rounds(mut self, rounds: usize, mu: f64) -> Self {
        self.rounds = rounds;
        self.mu = mu;
        self
    }

    pub fn with_iterations(mut self, t: usize) -> Self {
        self.iterations = IterationCap::Fixed(t);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stop_threshold(mut self, threshold: f64) -> Self {
        self.stop_threshold = threshold;
        self
    }

    pub fn with_ledger_mode(mut self, mode: LedgerMode) -> Self {
        self.ledger_mode = mode;
        self
    }

    /// Barrier weight of round `k` (0-based).
    pub fn eta(&self, round: usize) -> f64 {
        self.eta0 / self.mu.powi(round as i32)
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            sigma: match self.mode {
                Mode::Exact => 0.0,
                Mode::Stochastic => self.sigma,
            },
            kind: self.noise_kind.clone(),
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 must be positive, got {}", self.eta0));
        }
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return bad(format!("mu must exceed 1, got {}", self.mu));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.stop_threshold >= 0.0) {
            return bad(format!(
                "stop threshold must be nonnegative, got {}",
                self.stop_threshold
            ));
        }
        match self.iterations {
            IterationCap::Fixed(0) => bad("iteration cap must be at least 1".into()),
            IterationCap::Auto {
                barrier_lower_bound: Some(b),
            } if !b.is_finite() => bad("barrier lower bound must be finite".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("slack exhausted in round {round}: no safe probe can be certified")]
    SlackExhausted {
        round: usize,
        report: Box<SolveReport>,
    },
    #[error("non-finite measurement at iteration {t}")]
    NonFiniteMeasurement { t: usize },
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Per-iteration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    /// Iteration index, counted across rounds (matches the ledger tag).
    pub t: usize,
    pub x: Vec<f64>,
    pub nu: f64,
    pub n: u64,
    pub gamma: f64,
    pub g: Vec<f64>,
    pub gnorm: f64,
    /// `min_i (-v_i)` over the values below.
    pub slack: f64,
    /// Constraint values used: exact values or upper confidence bounds.
    pub values: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Sample mean of the objective at `x_t`.
    pub objective: f64,
    /// Barrier value estimate from the measured values.
    pub barrier: f64,
    /// Oracle calls so far, including this iteration.
    pub cum_measurements: u64,
    /// `gamma_t ||g_t||^2`.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemStatus {
    Completed,
    EarlyStopped,
    SlackExhausted,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemResult {
    pub round: usize,
    pub eta: f64,
    pub iteration_cap: usize,
    pub trajectory: Vec<IterateRecord>,
    /// Index into `trajectory` of `argmin_t gamma_t ||g_t||^2`.
    pub selected: Option<usize>,
    /// Point after the last step.
    pub final_x: Vec<f64>,
    pub status: SubproblemStatus,
    pub measurements: u64,
}

impl SubproblemResult {
    /// The selected iterate. Panics on an empty trajectory.
    pub fn selected_record(&self) -> &IterateRecord {
        &self.trajectory[self
            .selected
            .expect("empty trajectory has no selected iterate")]
    }

    /// `sum_t (d + 1) n_t`.
    pub fn expected_measurements(&self, dimension: usize) -> u64 {
        self.trajectory
            .iter()
            .map(|r| (dimension as u64 + 1) * r.n)
            .sum()
    }

    pub fn min_slack(&self) -> f64 {
        self.trajectory
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.slack))
    }
}

/// Outcome of the annealed solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub config: SolverConfig,
    pub rounds: Vec<SubproblemResult>,
    pub kkt: Option<KktReport>,
    /// Total oracle calls N_T.
    pub measurements: u64,
    /// Smallest slack seen over all iterates (UCB slack with a noisy oracle).
    pub min_slack: f64,
    /// Smallest ground-truth slack over all iterates.
    pub min_true_slack: f64,
    /// Largest `||lambda_t||_inf` seen; the observed scaling constant.
    pub max_dual: f64,
    pub violations: Vec<Violation>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub ledger: Option<Ledger>,
}

impl SolveReport {
    pub fn final_round(&self) -> &SubproblemResult {
        self.rounds.last().expect("at least one round")
    }

    /// Selected iterate of the last round that produced one.
    pub fn selected(&self) -> Option<&IterateRecord> {
        self.rounds
            .iter()
            .rev()
            .find_map(|r| r.selected.map(|k| &r.trajectory[k]))
    }

    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn expected_measurements(&self, dimension: usize) -> u64 {
        self.rounds
            .iter()
            .map(|r| r.expected_measurements(dimension))
            .sum()
    }
}

/// `ceil(2 dB max{(m M eta + 4 L^2 m) / eta^3, L / eta^2})`, at least 1.
pub fn iteration_budget(
    eta: f64,
    m: usize,
    smoothness: f64,
    lipschitz: f64,
    gap: f64,
) -> Result<u64, SolverError> {
    if !(gap > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "barrier gap must be positive, got {gap}"
        )));
    }
    if !(eta > 0.0 && smoothness > 0.0 && lipschitz > 0.0) || m == 0 {
        return Err(SolverError::InvalidConfig(
            "iteration budget needs positive eta, M, L, m".into(),
        ));
    }
    let m = m as f64;
    let curvature = (m * smoothness * eta + 4.0 * lipschitz * lipschitz * m) / eta.powi(3);
    let gradient = lipschitz / (eta * eta);
    let t = (2.0 * gap * curvature.max(gradient)).ceil();
    Ok(if t < 1.0 {
        1
    } else if t >= u64::MAX as f64 {
        u64::MAX
    } else {
        t as u64
    })
}

/// Lower bound on `min B_eta` from a coarse grid over the problem bounds:
/// the smallest feasible objective value minus `eta m ln(max slack)`.
pub fn barrier_lower_bound(problem: &ProblemSpec, eta: f64) -> Option<f64> {
    let bounds = problem.bounds.as_ref()?;
    let d = problem.dimension;
    let per_axis: usize = match d {
        1 => 2001,
        2 => 201,
        3 => 41,
        4 => 17,
        _ => 7,
    };
    let mut best_objective = f64::INFINITY;
    let mut max_slack: f64 = 0.0;
    let mut index = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for j in 0..d {
            let frac = index[j] as f64 / (per_axis - 1) as f64;
            x[j] = bounds.lower[j] + frac * (bounds.upper[j] - bounds.lower[j]);
        }
        let values = problem.constraint_values(&x);
        if values.iter().all(|v| *v <= 0.0) {
            best_objective = best_objective.min(problem.objective.value(&x));
            for v in &values {
                max_slack = max_slack.max(-v);
            }
        }
        let mut j = 0;
        loop {
            if j == d {
                let slack_term = if max_slack > 1.0 { max_slack.ln() } else { 0.0 };
                return best_objective.is_finite().then(|| {
                    best_objective - eta * problem.constraint_count() as f64 * slack_term
                });
            }
            index[j] += 1;
            if index[j] < per_axis {
                break;
            }
            index[j] = 0;
            j += 1;
        }
    }
}

fn iteration_cap(
    problem: &ProblemSpec,
    config: &SolverConfig,
    x_start: &[f64],
    eta: f64,
) -> Result<usize, SolverError> {
    match config.iterations {
        IterationCap::Fixed(t) => Ok(t),
        IterationCap::Auto {
            barrier_lower_bound: lb,
        } => {
            let low = match lb {
                Some(b) => b,
                None => barrier_lower_bound(problem, eta).ok_or_else(|| {
                    SolverError::InvalidConfig(
                        "automatic iteration cap needs problem bounds or a barrier lower bound"
                            .into(),
                    )
                })?,
            };
            let gap = problem.barrier_value(x_start, eta) - low;
            let t = if gap > 0.0 {
                iteration_budget(
                    eta,
                    problem.constraint_count(),
                    problem.smoothness,
                    problem.lipschitz,
                    gap,
                )?
            } else {
                1
            };
            Ok((t.min(config.max_auto_iterations as u64)) as usize)
        }
    }
}

/// Runs one barrier subproblem on an existing oracle.
///
/// `start_values` are constraint UCBs already known at `x_start` (noisy
/// mode); they size the first batch. Iteration tags start at `t_offset`.
pub fn run_subproblem(
    oracle: &mut Oracle<'_>,
    config: &SolverConfig,
    round: usize,
    x_start: &[f64],
    eta: f64,
    start_values: Option<&[f64]>,
    t_offset: usize,
) -> Result<SubproblemResult, SolverError> {
    let problem = oracle.problem();
    let geometry = BarrierGeometry::from_problem(problem);
    let d = problem.dimension;
    let cap = iteration_cap(problem, config, x_start, eta)?;
    let noisy = config.mode == Mode::Stochastic;
    let sigma = oracle.noise_model().sigma;
    let noise_bound = noisy.then_some((sigma, config.delta));
    let start_measurements = oracle.measurements();

    let mut x = x_start.to_vec();
    let mut previous: Option<Vec<f64>> = start_values.map(|v| v.to_vec());
    let mut trajectory: Vec<IterateRecord> = Vec::new();
    let mut status = SubproblemStatus::Completed;

    for step in 0..cap {
        let t = t_offset + step;
        oracle.set_iteration(t);

        // Radius and batch size; with a noisy oracle and no prior bounds the
        // center batch is sized for the largest admissible radius.
        let (center, nu, n, values) = if noisy {
            let (planned_nu, n) = match &previous {
                Some(prev) => {
                    let nu = geometry.probe_radius(eta, prev, true)?;
                    (
                        Some(nu),
                        estimator::batch_size(nu, sigma, config.delta, problem.smoothness)?,
                    )
                }
                None => {
                    let nu_max = eta / ((d as f64).sqrt() * problem.smoothness);
                    (
                        None,
                        estimator::batch_size(nu_max, sigma, config.delta, problem.smoothness)?,
                    )
                }
            };
            if exceeds_budget(config, oracle.measurements(), d, n) {
                status = SubproblemStatus::BudgetExceeded;
                break;
            }
            let center = estimator::measure_center(oracle, &x, n, true)?;
            let values = confidence_values(problem, &center, n, sigma, config.delta)?;
            if !(barrier::min_slack(&values) > 0.0) {
                status = SubproblemStatus::SlackExhausted;
                break;
            }
            let nu = match planned_nu {
                Some(nu) => nu,
                None => geometry.probe_radius(eta, &values, true)?,
            };
            (center, nu, n, values)
        } else {
            if exceeds_budget(config, oracle.measurements(), d, 1) {
                status = SubproblemStatus::BudgetExceeded;
                break;
            }
            let center = estimator::measure_center(oracle, &x, 1, false)?;
            let values = center[1..].to_vec();
            if !(barrier::min_slack(&values) > 0.0) {
                status = SubproblemStatus::SlackExhausted;
                break;
            }
            let nu = geometry.probe_radius(eta, &values, false)?;
            (center, nu, 1, values)
        };
        if center.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteMeasurement { t });
        }

        let probes = estimator::probe_from_center(oracle, &x, center, nu, n, noise_bound)?;
        if probes
            .gradients
            .iter()
            .any(|g| g.gradient.iter().any(|v| !v.is_finite()))
        {
            return Err(SolverError::NonFiniteMeasurement { t });
        }
        let constraint_gradients: Vec<&[f64]> = probes.gradients[1..]
            .iter()
            .map(|g| g.gradient.as_slice())
            .collect();
        let g = barrier::barrier_gradient(
            &probes.gradients[0].gradient,
            &constraint_gradients,
            &values,
            eta,
        )?;
        let l2 = geometry.local_smoothness(&values, eta)?;
        let gnorm = norm2(&g);
        let gamma = geometry.step_size(&values, gnorm, l2)?;
        let objective = probes.center[0];
        let record = IterateRecord {
            t,
            x: x.clone(),
            nu,
            n,
            gamma,
            gnorm,
            slack: barrier::min_slack(&values),
            lambda: barrier::duals(&values, eta),
            objective,
            barrier: barrier::barrier_value(objective, &values, eta)?,
            cum_measurements: oracle.measurements(),
            score: gamma * gnorm * gnorm,
            values: values.clone(),
            g,
        };
        let stop = record.score <= config.stop_threshold;
        axpy(-gamma, &record.g, &mut x);
        trajectory.push(record);
        previous = Some(values);
        if stop {
            status = SubproblemStatus::EarlyStopped;
            break;
        }
    }

    let selected = select(&trajectory);
    Ok(SubproblemResult {
        round,
        eta,
        iteration_cap: cap,
        final_x: if status == SubproblemStatus::EarlyStopped {
            trajectory.last().map(|r| r.x.clone()).unwrap_or(x)
        } else {
            x
        },
        trajectory,
        selected,
        status,
        measurements: oracle.measurements() - start_measurements,
    })
}

fn exceeds_budget(config: &SolverConfig, used: u64, d: usize, n: u64) -> bool {
    match config.max_measurements {
        Some(max) => used.saturating_add((d as u64 + 1).saturating_mul(n)) > max,
        None => false,
    }
}

/// Constraint UCBs from center means; noise-free constraints keep their value.
fn confidence_values(
    problem: &ProblemSpec,
    center: &[f64],
    n: u64,
    sigma: f64,
    delta: f64,
) -> Result<Vec<f64>, EstimatorError> {
    (1..center.len())
        .map(|i| {
            if problem.is_known_exactly(i) {
                Ok(center[i])
            } else {
                estimator::ucb_from_mean(center[i], n, sigma, delta).map(|b| b.upper)
            }
        })
        .collect()
}

/// `argmin_t gamma_t ||g_t||^2`, smallest index on ties.
pub fn select(trajectory: &[IterateRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in trajectory.iter().enumerate() {
        if best.map_or(true, |(_, s)| r.score < s) {
            best = Some((k, r.score));
        }
    }
    best.map(|(k, _)| k)
}

/// Runs a single barrier subproblem from `x_start` with its own oracle.
pub fn solve_subproblem(
    problem: &ProblemSpec,
    config: &SolverConfig,
    x_start: &[f64],
    eta: f64,
) -> Result<(SubproblemResult, Ledger), SolverError> {
    config.validate()?;
    let mut oracle = Oracle::new(problem, config.noise_model(), config.ledger_mode);
    let result = run_subproblem(&mut oracle, config, 0, x_start, eta, None, 0)?;
    Ok((result, oracle.into_ledger()))
}

/// Runs `config.rounds` barrier subproblems with `eta_k = eta0 / mu^k`,
/// audits the ledger against the ground-truth constraints and certifies the
/// final selected iterate.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    config.validate()?;
    let clock = Instant::now();
    let mut oracle = Oracle::new(problem, config.noise_model(), config.ledger_mode);
    let mut rounds: Vec<SubproblemResult> = Vec::with_capacity(config.rounds);
    let mut x = problem.start.clone();
    let mut start_values: Option<Vec<f64>> = None;
    let mut t_offset = 0;
    let mut exhausted = None;

    for round in 0..config.rounds {
        let eta = config.eta(round);
        let result = run_subproblem(
            &mut oracle,
            config,
            round,
            &x,
            eta,
            start_values.as_deref(),
            t_offset,
        )?;
        t_offset += result.trajectory.len();
        if let Some(k) = result.selected {
            x = result.trajectory[k].x.clone();
            if config.mode == Mode::Stochastic {
                start_values = Some(result.trajectory[k].values.clone());
            }
        }
        let halted = result.status == SubproblemStatus::SlackExhausted;
        rounds.push(result);
        if halted {
            exhausted = Some(round);
            break;
        }
    }

    let ledger = oracle.into_ledger();
    let violations = audit_safety(&ledger, problem);
    let mut report = SolveReport {
        problem: problem.name.clone(),
        config: config.clone(),
        kkt: None,
        measurements: ledger.measurements(),
        min_slack: rounds
            .iter()
            .map(|r| r.min_slack())
            .fold(f64::INFINITY, f64::min),
        min_true_slack: rounds
            .iter()
            .flat_map(|r| &r.trajectory)
            .map(|rec| barrier::min_slack(&problem.constraint_values(&rec.x)))
            .fold(f64::INFINITY, f64::min),
        max_dual: rounds
            .iter()
            .flat_map(|r| &r.trajectory)
            .map(|rec| norm_inf(&rec.lambda))
            .fold(0.0, f64::max),
        violations,
        wall_clock_seconds: 0.0,
        ledger: Some(ledger),
        rounds,
    };
    if let Some(selected) = report.selected() {
        let eta = report
            .rounds
            .iter()
            .rev()
            .find(|r| r.selected.is_some())
            .map(|r| r.eta)
            .unwrap_or(config.eta0);
        let mut kkt = certify_kkt(problem, &selected.x, &selected.lambda, eta, config.mode);
        kkt.min_slack = Some(report.min_slack);
        report.kkt = Some(kkt);
    }
    report.wall_clock_seconds = clock.elapsed().as_secs_f64();
    match exhausted {
        Some(round) => Err(SolverError::SlackExhausted {
            round,
            report: Box::new(report),
        }),
        None => Ok(report),
    }
}
