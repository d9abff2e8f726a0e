//! Benchmark and verification problems.

mod analytic;
mod grid;
mod random;
mod turning;

pub use analytic::{
    by_name, disk_barrier_minimizer, disk_kkt_point, disk_quadratic, linear_1d,
    linear_1d_barrier_minimizer,
};
pub use grid::{grid_reference, GridLevel, GridTarget, ReferenceSolution};
pub use random::{random_instance, RandomInstance};
pub use turning::{turning, turning_eval, TurningFunction, TurningModel};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::norm2;
use crate::oracle::ProblemSpec;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("tool life T(x) = {value} is not positive")]
    ToolLife { value: f64 },
    #[error("unknown problem function: {0}")]
    UnknownFunction(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("no feasible grid point found")]
    NoFeasibleGridPoint,
    #[error("grid of {points} points is too large")]
    GridTooLarge { points: u64 },
    #[error("grid search needs problem bounds")]
    MissingBounds,
    #[error("grid resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("invalid random instance: {0}")]
    InvalidInstance(String),
}

/// Largest sampled gradient and Hessian norms of one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionConstants {
    pub index: usize,
    pub name: String,
    pub max_gradient_norm: f64,
    pub max_hessian_norm: f64,
    pub lipschitz: Option<f64>,
    pub smoothness: f64,
}

impl FunctionConstants {
    pub fn lipschitz_ok(&self) -> bool {
        self.lipschitz
            .map_or(true, |l| self.max_gradient_norm <= l * (1.0 + 1e-6))
    }

    pub fn smoothness_ok(&self) -> bool {
        self.max_hessian_norm <= self.smoothness * (1.0 + 1e-6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantCheck {
    pub samples: usize,
    pub functions: Vec<FunctionConstants>,
}

impl ConstantCheck {
    pub fn is_valid(&self) -> bool {
        self.functions
            .iter()
            .all(|f| f.lipschitz_ok() && f.smoothness_ok())
    }

    /// One line per violated constant.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.functions {
            if !f.lipschitz_ok() {
                out.push(format!(
                    "{} (f{}): sampled gradient norm {:.4} exceeds L = {}",
                    f.name,
                    f.index,
                    f.max_gradient_norm,
                    f.lipschitz.unwrap_or(f64::NAN)
                ));
            }
            if !f.smoothness_ok() {
                out.push(format!(
                    "{} (f{}): sampled Hessian norm {:.4} exceeds M = {}",
                    f.name, f.index, f.max_hessian_norm, f.smoothness
                ));
            }
        }
        out
    }
}

/// Samples feasible points in the problem bounds and records the largest
/// gradient and Hessian norms of every function, for comparison with the
/// stated `L` and `M`. Gradients are analytic when available; Hessians are
/// central differences of the gradients.
pub fn check_constants(
    problem: &ProblemSpec,
    samples: usize,
    seed: u64,
) -> Result<ConstantCheck, DomainError> {
    let bounds = problem.bounds.as_ref().ok_or(DomainError::MissingBounds)?;
    let d = problem.dimension;
    let m = problem.constraint_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut functions: Vec<FunctionConstants> = (0..=m)
        .map(|i| FunctionConstants {
            index: i,
            name: problem.function(i).name.clone(),
            max_gradient_norm: 0.0,
            max_hessian_norm: 0.0,
            lipschitz: (i > 0).then(|| problem.constraint_lipschitz(i)),
            smoothness: problem.function_smoothness(i),
        })
        .collect();
    let h = 1e-5;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < samples && attempts < samples * 100 {
        attempts += 1;
        let x: Vec<f64> = (0..d)
            .map(|j| rng.random_range(bounds.lower[j]..=bounds.upper[j]))
            .collect();
        if problem.constraint_values(&x).iter().any(|v| *v > 0.0) {
            continue;
        }
        taken += 1;
        for f in functions.iter_mut() {
            f.max_gradient_norm = f
                .max_gradient_norm
                .max(norm2(&problem.reference_gradient(&x, f.index)));
            let mut hess = DMatrix::zeros(d, d);
            let mut y = x.clone();
            for k in 0..d {
                y[k] = x[k] + h;
                let gp = problem.reference_gradient(&y, f.index);
                y[k] = x[k] - h;
                let gm = problem.reference_gradient(&y, f.index);
                y[k] = x[k];
                for j in 0..d {
                    hess[(j, k)] = (gp[j] - gm[j]) / (2.0 * h);
                }
            }
            let sym = (&hess + hess.transpose()) * 0.5;
            let norm = SymmetricEigen::new(sym).eigenvalues.amax();
            f.max_hessian_norm = f.max_hessian_norm.max(norm);
        }
    }
    Ok(ConstantCheck {
        samples: taken,
        functions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_constants_hold() {
        for p in [linear_1d(), disk_quadratic()] {
            let c = check_constants(&p, 500, 1).unwrap();
            assert!(c.is_valid(), "{:?}", c.warnings());
        }
    }

    #[test]
    fn random_instance_constants_hold() {
        for seed in 0..5 {
            let p = random_instance(3, 2, seed, 2.0, 3.0).unwrap();
            let c = check_constants(&p, 300, seed).unwrap();
            assert!(c.is_valid(), "{:?}", c.warnings());
        }
    }

    #[test]
    fn turning_constants_are_flagged_not_fatal() {
        let c = check_constants(&turning(), 300, 0).unwrap();
        assert!(c.samples > 0);
        let roughness = &c.functions[1];
        // The fitted roughness surface is stiffer than M = 5 in rescaled units.
        assert!(!roughness.smoothness_ok());
        assert!(!c.warnings().is_empty());
    }
}
