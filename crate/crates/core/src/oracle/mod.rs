//! Zeroth-order oracles.
//!
//! An [`Oracle`] wraps a [`ProblemSpec`] and answers function-value queries,
//! either exactly (EZO) or corrupted with zero-mean sub-Gaussian noise (SZO).
//! Every query is appended to a [`Ledger`] so that the run can be audited
//! against the ground-truth constraints afterwards. The oracle itself never
//! refuses an infeasible query.

mod ledger;
mod problem;

pub use ledger::{audit_rows, audit_safety, Ledger, LedgerEntry, LedgerMode, LedgerRow, Violation};
pub use problem::{
    Bounds, Constraint, GradientFn, ProblemError, ProblemSpec, SmoothFunction, ValueFn,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Distribution family of the additive measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N(0, sigma^2)`, the canonical sigma-sub-Gaussian law.
    #[default]
    Gaussian,
    /// Uniform on `[-sigma, sigma]`; bounded support, hence sigma-sub-Gaussian.
    Uniform,
    /// Replays the given draws in order (cycling), ignoring sigma. Test use.
    Scripted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            kind: NoiseKind::Gaussian,
            seed,
        }
    }

    pub fn none() -> Self {
        Self::gaussian(0.0, 0)
    }

    pub fn scripted(draws: Vec<f64>) -> Self {
        Self {
            sigma: 0.0,
            kind: NoiseKind::Scripted(draws),
            seed: 0,
        }
    }

    /// True when noisy evaluation degenerates to exact evaluation.
    pub fn is_silent(&self) -> bool {
        match &self.kind {
            NoiseKind::Scripted(draws) => draws.iter().all(|d| *d == 0.0),
            _ => self.sigma == 0.0,
        }
    }
}

/// Seeded stream of noise draws. Draws are independent across calls.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    model: NoiseModel,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl NoiseSource {
    pub fn new(model: NoiseModel) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Self {
            model,
            rng,
            cursor: 0,
        }
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    #[inline]
    pub fn draw(&mut self) -> f64 {
        match &self.model.kind {
            NoiseKind::Gaussian => {
                if self.model.sigma == 0.0 {
                    return 0.0;
                }
                let z: f64 = self.rng.sample(StandardNormal);
                self.model.sigma * z
            }
            NoiseKind::Uniform => {
                if self.model.sigma == 0.0 {
                    return 0.0;
                }
                self.model.sigma * self.rng.random_range(-1.0..=1.0)
            }
            NoiseKind::Scripted(draws) => {
                if draws.is_empty() {
                    return 0.0;
                }
                let v = draws[self.cursor % draws.len()];
                self.cursor += 1;
                v
            }
        }
    }
}

/// Function-value oracle over a problem, recording every query.
#[derive(Debug)]
pub struct Oracle<'p> {
    problem: &'p ProblemSpec,
    noise: NoiseSource,
    ledger: Ledger,
    iteration: usize,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p ProblemSpec, noise: NoiseModel, mode: LedgerMode) -> Self {
        Self {
            problem,
            noise: NoiseSource::new(noise),
            ledger: Ledger::new(problem.dimension, problem.constraint_count(), mode),
            iteration: 0,
        }
    }

    /// Noise-free oracle with a per-measurement ledger.
    pub fn exact(problem: &'p ProblemSpec) -> Self {
        Self::new(problem, NoiseModel::none(), LedgerMode::PerMeasurement)
    }

    pub fn problem(&self) -> &'p ProblemSpec {
        self.problem
    }

    pub fn noise_model(&self) -> &NoiseModel {
        self.noise.model()
    }

    /// Tags subsequent ledger entries with iteration `t`.
    pub fn set_iteration(&mut self, t: usize) {
        self.iteration = t;
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    /// Total number of oracle calls so far.
    pub fn measurements(&self) -> u64 {
        self.ledger.measurements()
    }

    /// Exact value `f_i(x)` (EZO).
    pub fn eval_exact(&mut self, x: &[f64], i: usize) -> f64 {
        let v = self.problem.value(x, i);
        self.ledger.record(self.iteration, 0, 1, x, Some(i), &[v]);
        v
    }

    /// Noisy value `f_i(x) + xi` (SZO); exact when constraint `i` is known.
    pub fn eval_noisy(&mut self, x: &[f64], i: usize) -> f64 {
        let mut v = self.problem.value(x, i);
        if !self.problem.is_known_exactly(i) {
            v += self.noise.draw();
        }
        self.ledger.record(self.iteration, 0, 1, x, Some(i), &[v]);
        v
    }

    /// Takes `n` measurements of every function at `x` and writes the sample
    /// means into `means` (length m + 1). Each replicate is one oracle call
    /// returning all m + 1 values.
    pub fn sample_all(&mut self, x: &[f64], probe: usize, n: u64, noisy: bool, means: &mut [f64]) {
        let count = self.problem.constraint_count() + 1;
        debug_assert_eq!(means.len(), count);
        let truth: Vec<f64> = (0..count).map(|i| self.problem.value(x, i)).collect();
        let noised: Vec<bool> = (0..count)
            .map(|i| noisy && !self.problem.is_known_exactly(i))
            .collect();
        self.sample_with(x, probe, n, None, &truth, &noised, means);
    }

    /// Takes `n` measurements of function `i` only and returns their mean.
    pub fn sample_one(&mut self, x: &[f64], probe: usize, i: usize, n: u64, noisy: bool) -> f64 {
        let truth = [self.problem.value(x, i)];
        let noised = [noisy && !self.problem.is_known_exactly(i)];
        let mut mean = [0.0];
        self.sample_with(x, probe, n, Some(i), &truth, &noised, &mut mean);
        mean[0]
    }

    #[allow(clippy::too_many_arguments)]
    fn sample_with(
        &mut self,
        x: &[f64],
        probe: usize,
        n: u64,
        index: Option<usize>,
        truth: &[f64],
        noised: &[bool],
        means: &mut [f64],
    ) {
        let any_noise = noised.iter().any(|b| *b);
        match self.ledger.mode() {
            LedgerMode::PerMeasurement => {
                // Averaging the noise rather than the values keeps noiseless
                // means bit-exact.
                let mut noise_sums = vec![0.0; truth.len()];
                let mut values = truth.to_vec();
                for _ in 0..n {
                    for (k, v) in values.iter_mut().enumerate() {
                        *v = truth[k];
                        if noised[k] {
                            let e = self.noise.draw();
                            noise_sums[k] += e;
                            *v += e;
                        }
                    }
                    self.ledger
                        .record(self.iteration, probe, 1, x, index, &values);
                }
                for (k, m) in means.iter_mut().enumerate() {
                    *m = truth[k] + noise_sums[k] / n as f64;
                }
            }
            LedgerMode::Batched => {
                // f_i(x) is deterministic; only the noise is drawn per call,
                // in the same order as sequential single calls would draw it.
                let mut noise_sums = vec![0.0; truth.len()];
                if any_noise {
                    for _ in 0..n {
                        for (k, s) in noise_sums.iter_mut().enumerate() {
                            if noised[k] {
                                *s += self.noise.draw();
                            }
                        }
                    }
                }
                for (k, m) in means.iter_mut().enumerate() {
                    *m = truth[k] + noise_sums[k] / n as f64;
                }
                self.ledger
                    .record(self.iteration, probe, n, x, index, means);
            }
        }
    }
}
