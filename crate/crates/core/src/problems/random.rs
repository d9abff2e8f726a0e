//! Seeded random quadratic instances on the box `[-1, 1]^d`.
//!
//! The objective is `x'Qx / 2 + b'x` with `||Q|| <= M` (possibly
//! indefinite). Each random constraint is a convex quadratic
//! `x'Ax / 2 + g'x + h` with `0 <= A <= a I`, `a sqrt(d) + ||g|| <= L` and
//! `h < 0`, so the origin is strictly feasible and constraint gradients are
//! bounded by `L` on the box. The box itself enters as `2d` noise-free
//! constraints.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DomainError;
use crate::oracle::{Bounds, Constraint, ProblemSpec, SmoothFunction};

/// Reproducible descriptor of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomInstance {
    pub dimension: usize,
    pub constraints: usize,
    pub seed: u64,
    pub smoothness: f64,
    pub lipschitz: f64,
}

impl RandomInstance {
    pub fn build(&self) -> Result<ProblemSpec, DomainError> {
        random_instance(
            self.dimension,
            self.constraints,
            self.seed,
            self.smoothness,
            self.lipschitz,
        )
    }
}

#[derive(Debug, Clone)]
struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.a * &x)) + self.b.dot(&x) + self.c
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.a * x + &self.b).as_slice().to_vec()
    }

    fn into_function(self, name: String) -> SmoothFunction {
        let q = Arc::new(self);
        let qg = Arc::clone(&q);
        SmoothFunction::new(name, move |x: &[f64]| q.value(x))
            .with_gradient(move |x: &[f64]| qg.gradient(x))
    }
}

fn orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn symmetric(d: usize, eigenvalues: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = orthogonal(d, rng);
    let a = &u * DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues)) * u.transpose();
    (&a + a.transpose()) * 0.5
}

fn random_vector(d: usize, norm: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    if n == 0.0 {
        DVector::zeros(d)
    } else {
        v * (norm / n)
    }
}

/// Generates a random instance; the strictly feasible witness is `x_0 = 0`.
pub fn random_instance(
    d: usize,
    m: usize,
    seed: u64,
    smoothness: f64,
    lipschitz: f64,
) -> Result<ProblemSpec, DomainError> {
    if d == 0 || m == 0 {
        return Err(DomainError::InvalidInstance(format!(
            "need d >= 1 and m >= 1, got d = {d}, m = {m}"
        )));
    }
    if !(smoothness > 0.0 && lipschitz > 0.0) {
        return Err(DomainError::InvalidInstance(
            "M and L must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigen: Vec<f64> = (0..d)
        .map(|_| rng.random_range(-smoothness..=smoothness))
        .collect();
    let objective = Quadratic {
        a: symmetric(d, &eigen, &mut rng),
        b: random_vector(d, rng.random_range(0.1..=1.0), &mut rng),
        c: 0.0,
    }
    .into_function("objective".into());

    let root_d = (d as f64).sqrt();
    let curvature = smoothness.min(0.5 * lipschitz / root_d);
    let mut constraints = Vec::with_capacity(m + 2 * d);
    for i in 0..m {
        let a = curvature * rng.random_range(0.0..=1.0);
        let eigen: Vec<f64> = (0..d).map(|_| a * rng.random_range(0.0..=1.0)).collect();
        let gnorm = (lipschitz - a * root_d) * rng.random_range(0.2..=1.0);
        let q = Quadratic {
            a: symmetric(d, &eigen, &mut rng),
            b: random_vector(d, gnorm, &mut rng),
            c: -rng.random_range(0.2..=1.0),
        };
        constraints.push(Constraint::new(q.into_function(format!("c{}", i + 1))));
    }
    for j in 0..d {
        constraints.push(Constraint::coordinate_bound(
            format!("x{}>=-1", j + 1),
            d,
            j,
            -1.0,
            false,
        ));
        constraints.push(Constraint::coordinate_bound(
            format!("x{}<=1", j + 1),
            d,
            j,
            1.0,
            true,
        ));
    }
    let name = format!("random_d{d}_m{m}_s{seed}");
    ProblemSpec::new(
        name,
        objective,
        constraints,
        smoothness,
        lipschitz,
        vec![0.0; d],
    )
    .and_then(|p| p.with_bounds(Bounds::new(vec![-1.0; d], vec![1.0; d])))
    .map_err(|e| DomainError::InvalidInstance(e.to_string()))
}
