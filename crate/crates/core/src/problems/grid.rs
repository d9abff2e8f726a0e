//! Brute-force grid search, used as an independent reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DomainError;
use crate::oracle::ProblemSpec;

const MAX_GRID_POINTS: u64 = 50_000_000;
const REFINE_FACTOR: f64 = 10.0;
const REFINE_LEVELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTarget {
    /// `f_0` over feasible points.
    Objective,
    /// `B_eta` over strictly feasible points.
    Barrier(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLevel {
    pub resolution: f64,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub target: GridTarget,
    /// Spacing of the coarse grid.
    pub resolution: f64,
    pub point: Vec<f64>,
    pub value: f64,
    /// Coarse result followed by each accepted refinement.
    pub levels: Vec<GridLevel>,
    pub evaluations: u64,
}

impl ReferenceSolution {
    /// Spacing of the finest accepted level.
    pub fn final_resolution(&self) -> f64 {
        self.levels.last().map_or(self.resolution, |l| l.resolution)
    }
}

fn target_value(problem: &ProblemSpec, target: GridTarget, x: &[f64]) -> Option<f64> {
    match target {
        GridTarget::Objective => {
            if problem
                .constraints
                .iter()
                .all(|c| c.function.value(x) <= 0.0)
            {
                Some(problem.objective.value(x)).filter(|v| v.is_finite())
            } else {
                None
            }
        }
        GridTarget::Barrier(eta) => Some(problem.barrier_value(x, eta)).filter(|v| v.is_finite()),
    }
}

/// Grid point and target value.
type Best = (Vec<f64>, f64);

/// Minimizes the target over an axis-aligned grid; ties go to the smallest
/// flat index so the result does not depend on thread scheduling.
fn search(
    problem: &ProblemSpec,
    target: GridTarget,
    lower: &[f64],
    upper: &[f64],
    h: f64,
) -> Result<(Option<Best>, u64), DomainError> {
    let counts: Vec<u64> = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| ((hi - lo) / h + 1e-9).floor() as u64 + 1)
        .collect();
    let total = counts
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(*c))
        .unwrap_or(u64::MAX);
    if total > MAX_GRID_POINTS {
        return Err(DomainError::GridTooLarge { points: total });
    }
    let point = |mut k: u64| {
        let mut x = vec![0.0; lower.len()];
        for j in 0..lower.len() {
            x[j] = lower[j] + (k % counts[j]) as f64 * h;
            k /= counts[j];
        }
        x
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|k| target_value(problem, target, &point(k)).map(|v| (k, v)))
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        });
    Ok((best.map(|(k, v)| (point(k), v)), total))
}

/// Exhaustive search over an `h`-grid on the problem bounds, followed by two
/// local refinements with spacing `h / 10` and `h / 100`. A refinement is
/// kept only if it strictly lowers the target.
pub fn grid_reference(
    problem: &ProblemSpec,
    target: GridTarget,
    h: f64,
) -> Result<ReferenceSolution, DomainError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DomainError::NonPositiveResolution(h));
    }
    if problem.dimension > 3 {
        return Err(DomainError::GridTooLarge { points: u64::MAX });
    }
    let bounds = problem.bounds.as_ref().ok_or(DomainError::MissingBounds)?;
    let (best, mut evaluations) = search(problem, target, &bounds.lower, &bounds.upper, h)?;
    let (mut point, mut value) = best.ok_or(DomainError::NoFeasibleGridPoint)?;
    let mut levels = vec![GridLevel {
        resolution: h,
        point: point.clone(),
        value,
    }];
    let mut spacing = h;
    for _ in 0..REFINE_LEVELS {
        let lower: Vec<f64> = point
            .iter()
            .zip(&bounds.lower)
            .map(|(p, lo)| (p - spacing).max(*lo))
            .collect();
        let upper: Vec<f64> = point
            .iter()
            .zip(&bounds.upper)
            .map(|(p, hi)| (p + spacing).min(*hi))
            .collect();
        spacing /= REFINE_FACTOR;
        let (found, n) = search(problem, target, &lower, &upper, spacing)?;
        evaluations += n;
        match found {
            Some((p, v)) if v < value => {
                point = p;
                value = v;
                levels.push(GridLevel {
                    resolution: spacing,
                    point: point.clone(),
                    value,
                });
            }
            _ => break,
        }
    }
    Ok(ReferenceSolution {
        target,
        resolution: h,
        point,
        value,
        levels,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Bounds, Constraint, SmoothFunction};
    use crate::problems::{disk_quadratic, linear_1d};

    #[test]
    fn linear_barrier_minimizer() {
        let r = grid_reference(&linear_1d(), GridTarget::Barrier(0.1), 1e-4).unwrap();
        assert!((r.point[0] - 0.1).abs() <= 1e-4);
        assert!(r.levels.windows(2).all(|w| w[1].value < w[0].value));
    }

    #[test]
    fn disk_objective_minimizer() {
        let r = grid_reference(&disk_quadratic(), GridTarget::Objective, 1e-3).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            (r.point[0] - s).abs() <= 2e-3 && (r.point[1] - s).abs() <= 2e-3,
            "{:?}",
            r.point
        );
    }

    #[test]
    fn empty_feasible_set() {
        let p = linear_1d();
        let mut p = p.clone();
        p.constraints = vec![Constraint::new(SmoothFunction::new("one", |_: &[f64]| 1.0))];
        let err = grid_reference(&p, GridTarget::Objective, 0.1).unwrap_err();
        assert!(matches!(err, DomainError::NoFeasibleGridPoint));
    }

    #[test]
    fn rejects_bad_resolution_and_missing_bounds() {
        assert!(grid_reference(&linear_1d(), GridTarget::Objective, 0.0).is_err());
        let mut p = linear_1d();
        p.bounds = None;
        assert!(matches!(
            grid_reference(&p, GridTarget::Objective, 0.1),
            Err(DomainError::MissingBounds)
        ));
        let _ = Bounds::new(vec![0.0], vec![1.0]);
    }
}
