use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Scalar evaluator `R^d -> R`.
pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Analytic gradient evaluator, used for verification only.
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("at least one constraint is required")]
    NoConstraints,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("start point has {got} coordinates, expected {expected}")]
    StartDimension { expected: usize, got: usize },
    #[error("start point is not strictly feasible: constraint {index} ({name}) = {value}")]
    InfeasibleStart {
        index: usize,
        name: String,
        value: f64,
    },
    #[error("bounds must have {expected} coordinates with lower < upper")]
    InvalidBounds { expected: usize },
}

/// A named smooth function with an optional analytic gradient.
#[derive(Clone)]
pub struct SmoothFunction {
    pub name: String,
    value: ValueFn,
    gradient: Option<GradientFn>,
}

impl SmoothFunction {
    pub fn new<F>(name: impl Into<String>, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("name", &self.name)
            .field("gradient", &self.gradient.is_some())
            .finish()
    }
}

/// An inequality constraint `f(x) <= 0`.
///
/// `lipschitz` and `smoothness` override the problem-wide constants for this
/// constraint. An affine constraint has smoothness 0: finite differences
/// recover its gradient exactly.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub function: SmoothFunction,
    pub lipschitz: Option<f64>,
    pub smoothness: Option<f64>,
    /// Values are never corrupted by noise (e.g. known box constraints).
    pub known_exactly: bool,
}

impl Constraint {
    pub fn new(function: SmoothFunction) -> Self {
        Self {
            function,
            lipschitz: None,
            smoothness: None,
            known_exactly: false,
        }
    }

    /// Known affine constraint `sign * (x_j - bound) <= 0` with Lipschitz constant 1.
    pub fn coordinate_bound(
        name: impl Into<String>,
        dimension: usize,
        j: usize,
        bound: f64,
        upper: bool,
    ) -> Self {
        let sign = if upper { 1.0 } else { -1.0 };
        let function = SmoothFunction::new(name, move |x: &[f64]| sign * (x[j] - bound))
            .with_gradient(move |_x: &[f64]| {
                let mut g = vec![0.0; dimension];
                g[j] = sign;
                g
            });
        Self {
            function,
            lipschitz: Some(1.0),
            smoothness: Some(0.0),
            known_exactly: true,
        }
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn with_smoothness(mut self, smoothness: f64) -> Self {
        self.smoothness = Some(smoothness);
        self
    }

    pub fn known_exactly(mut self) -> Self {
        self.known_exactly = true;
        self
    }
}

/// Axis-aligned box containing the feasible set, used by grid references
/// and sampling checks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// Problem `min f_0(x)` subject to `f_i(x) <= 0, i = 1..m`.
///
/// `smoothness` (M) bounds the gradient Lipschitz constant of every
/// function; `lipschitz` (L) bounds the constraint gradients. The start
/// point must be strictly feasible.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dimension: usize,
    pub objective: SmoothFunction,
    pub constraints: Vec<Constraint>,
    pub smoothness: f64,
    pub lipschitz: f64,
    pub start: Vec<f64>,
    pub bounds: Option<Bounds>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        objective: SmoothFunction,
        constraints: Vec<Constraint>,
        smoothness: f64,
        lipschitz: f64,
        start: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        let dimension = start.len();
        if dimension == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        if constraints.is_empty() {
            return Err(ProblemError::NoConstraints);
        }
        for (name, value) in [
            ("smoothness M", smoothness),
            ("Lipschitz constant L", lipschitz),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ProblemError::NonPositiveConstant { name, value });
            }
        }
        for c in &constraints {
            if let Some(l) = c.lipschitz {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(ProblemError::NonPositiveConstant {
                        name: "constraint Lipschitz constant",
                        value: l,
                    });
                }
            }
            if let Some(s) = c.smoothness {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(ProblemError::NonPositiveConstant {
                        name: "constraint smoothness",
                        value: s,
                    });
                }
            }
        }
        let problem = Self {
            name: name.into(),
            dimension,
            objective,
            constraints,
            smoothness,
            lipschitz,
            start,
            bounds: None,
        };
        problem.check_strictly_feasible(&problem.start)?;
        Ok(problem)
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self, ProblemError> {
        let ok = bounds.lower.len() == self.dimension
            && bounds.upper.len() == self.dimension
            && bounds
                .lower
                .iter()
                .zip(&bounds.upper)
                .all(|(lo, hi)| lo < hi);
        if !ok {
            return Err(ProblemError::InvalidBounds {
                expected: self.dimension,
            });
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    /// Replaces the start point, re-checking strict feasibility.
    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self, ProblemError> {
        if start.len() != self.dimension {
            return Err(ProblemError::StartDimension {
                expected: self.dimension,
                got: start.len(),
            });
        }
        self.check_strictly_feasible(&start)?;
        self.start = start;
        Ok(self)
    }

    fn check_strictly_feasible(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dimension {
            return Err(ProblemError::StartDimension {
                expected: self.dimension,
                got: x.len(),
            });
        }
        for (index, c) in self.constraints.iter().enumerate() {
            let value = c.function.value(x);
            if !(value < 0.0) {
                return Err(ProblemError::InfeasibleStart {
                    index: index + 1,
                    name: c.function.name.clone(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Number of constraints m.
    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// Function `i` with 0 the objective and 1..=m the constraints.
    pub fn function(&self, i: usize) -> &SmoothFunction {
        if i == 0 {
            &self.objective
        } else {
            &self.constraints[i - 1].function
        }
    }

    /// Ground-truth value of function `i`.
    #[inline]
    pub fn value(&self, x: &[f64], i: usize) -> f64 {
        self.function(i).value(x)
    }

    /// Whether measurements of function `i` are noise-free.
    pub fn is_known_exactly(&self, i: usize) -> bool {
        i > 0 && self.constraints[i - 1].known_exactly
    }

    /// Ground-truth constraint values `f_1(x), ..., f_m(x)`.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.function.value(x))
            .collect()
    }

    pub fn constraint_lipschitz(&self, i: usize) -> f64 {
        self.constraints[i - 1].lipschitz.unwrap_or(self.lipschitz)
    }

    pub fn constraint_smoothness(&self, i: usize) -> f64 {
        self.constraints[i - 1]
            .smoothness
            .unwrap_or(self.smoothness)
    }

    /// Smoothness of function `i` (the objective uses M).
    pub fn function_smoothness(&self, i: usize) -> f64 {
        if i == 0 {
            self.smoothness
        } else {
            self.constraint_smoothness(i)
        }
    }

    /// True when every function carries an analytic gradient.
    pub fn has_analytic_gradients(&self) -> bool {
        self.objective.has_gradient() && self.constraints.iter().all(|c| c.function.has_gradient())
    }

    /// Analytic gradient of function `i`, falling back to a central
    /// difference of the ground-truth evaluator.
    pub fn reference_gradient(&self, x: &[f64], i: usize) -> Vec<f64> {
        let f = self.function(i);
        f.gradient(x)
            .unwrap_or_else(|| crate::linalg::central_difference(|y| f.value(y), x, 1e-7))
    }

    /// Ground-truth barrier gradient `grad f_0 + eta * sum grad f_i / (-f_i)`.
    pub fn barrier_gradient(&self, x: &[f64], eta: f64) -> Vec<f64> {
        let mut g = self.reference_gradient(x, 0);
        for i in 1..=self.constraint_count() {
            let v = self.value(x, i);
            crate::linalg::axpy(eta / (-v), &self.reference_gradient(x, i), &mut g);
        }
        g
    }

    /// Ground-truth barrier value; infinite outside the interior.
    pub fn barrier_value(&self, x: &[f64], eta: f64) -> f64 {
        let mut b = self.objective.value(x);
        for c in &self.constraints {
            let v = c.function.value(x);
            if v >= 0.0 {
                return f64::INFINITY;
            }
            b -= eta * (-v).ln();
        }
        b
    }
}
