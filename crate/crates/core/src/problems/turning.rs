//! Cost minimization of a turning process under a surface-roughness limit.
//!
//! Decision variables are the rescaled cutting speed `x_1 = 0.001 v_c` and
//! the feed `x_2 = f`. Tool life `T` and roughness `R` are fitted quadratic
//! response surfaces in `(v_c, f)`; the machining cost is
//! `C = t_c (C_M + C_I / T)` with machining time `t_c = k / (v_c f)`.

use serde::{Deserialize, Serialize};

use super::DomainError;
use crate::oracle::{Bounds, Constraint, ProblemSpec, SmoothFunction};

pub const SPEED_SCALE: f64 = 1000.0;
pub const BOX_LOWER: [f64; 2] = [0.1, 0.08];
pub const BOX_UPPER: [f64; 2] = [0.2, 0.16];
pub const START: [f64; 2] = [0.15, 0.09];

/// Coefficients of the turning model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningModel {
    /// Tool life: `t0 + t1 v + t2 f + t3 v^2 + t4 v f`.
    pub tool_life: [f64; 5],
    /// Roughness: `r0 + r1 v + r2 f + r3 v^2 + r4 v f`.
    pub roughness: [f64; 5],
    pub roughness_limit: f64,
    /// Machine cost rate.
    pub machine_cost: f64,
    /// Tool cost per tool life.
    pub tool_cost: f64,
    /// Workpiece geometry product in the machining time.
    pub geometry: f64,
    pub lipschitz: f64,
    pub smoothness: f64,
}

impl Default for TurningModel {
    fn default() -> Self {
        Self {
            tool_life: [127.5365, -0.84629, -144.21, 0.001703, 0.3656],
            roughness: [0.7844, -0.010035, 7.0877, 0.000034, -0.018969],
            roughness_limit: 0.7,
            machine_cost: 50.0,
            tool_cost: 40.0,
            geometry: 1.0,
            lipschitz: 7.0,
            smoothness: 5.0,
        }
    }
}

/// Which turning function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurningFunction {
    Cost,
    /// `R(x) - limit`.
    Roughness,
    /// Box residual `k` in order: `0.1 - x_1`, `x_1 - 0.2`, `0.08 - x_2`, `x_2 - 0.16`.
    Box(usize),
}

fn quadratic(c: &[f64; 5], v: f64, f: f64) -> f64 {
    c[0] + c[1] * v + c[2] * f + c[3] * v * v + c[4] * v * f
}

/// `(d/dv, d/df)` of the response surface.
fn quadratic_gradient(c: &[f64; 5], v: f64, f: f64) -> [f64; 2] {
    [c[1] + 2.0 * c[3] * v + c[4] * f, c[2] + c[4] * v]
}

impl TurningModel {
    pub fn tool_life(&self, x: &[f64]) -> f64 {
        quadratic(&self.tool_life, x[0] * SPEED_SCALE, x[1])
    }

    pub fn roughness(&self, x: &[f64]) -> f64 {
        quadratic(&self.roughness, x[0] * SPEED_SCALE, x[1])
    }

    pub fn cost(&self, x: &[f64]) -> Result<f64, DomainError> {
        let t = self.tool_life(x);
        if !(t > 0.0) {
            return Err(DomainError::ToolLife { value: t });
        }
        let v = x[0] * SPEED_SCALE;
        Ok(self.geometry / (v * x[1]) * (self.machine_cost + self.tool_cost / t))
    }

    pub fn eval(&self, x: &[f64], which: TurningFunction) -> Result<f64, DomainError> {
        match which {
            TurningFunction::Cost => self.cost(x),
            TurningFunction::Roughness => Ok(self.roughness(x) - self.roughness_limit),
            TurningFunction::Box(k) => box_residual(x, k),
        }
    }

    /// Gradient of the cost in the rescaled coordinates.
    pub fn cost_gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = x[0] * SPEED_SCALE;
        let f = x[1];
        let t = self.tool_life(x);
        let dt = quadratic_gradient(&self.tool_life, v, f);
        let rate = self.machine_cost + self.tool_cost / t;
        let time = self.geometry / (v * f);
        let drate = [
            -self.tool_cost / (t * t) * dt[0],
            -self.tool_cost / (t * t) * dt[1],
        ];
        let dv = -time / v * rate + time * drate[0];
        let df = -time / f * rate + time * drate[1];
        vec![dv * SPEED_SCALE, df]
    }

    pub fn roughness_gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = quadratic_gradient(&self.roughness, x[0] * SPEED_SCALE, x[1]);
        vec![g[0] * SPEED_SCALE, g[1]]
    }

    /// The problem in solver form: cost objective, one noisy roughness
    /// constraint and four noise-free box constraints.
    pub fn problem(&self) -> ProblemSpec {
        let cost_model = self.clone();
        let grad_model = self.clone();
        let objective = SmoothFunction::new("cost", move |x: &[f64]| {
            cost_model.cost(x).unwrap_or(f64::NAN)
        })
        .with_gradient(move |x: &[f64]| grad_model.cost_gradient(x));
        let r_model = self.clone();
        let rg_model = self.clone();
        let roughness = Constraint::new(
            SmoothFunction::new("roughness", move |x: &[f64]| {
                r_model.roughness(x) - r_model.roughness_limit
            })
            .with_gradient(move |x: &[f64]| rg_model.roughness_gradient(x)),
        )
        .with_lipschitz(self.lipschitz)
        .with_smoothness(self.smoothness);
        let constraints = vec![
            roughness,
            Constraint::coordinate_bound("speed_min", 2, 0, BOX_LOWER[0], false),
            Constraint::coordinate_bound("speed_max", 2, 0, BOX_UPPER[0], true),
            Constraint::coordinate_bound("feed_min", 2, 1, BOX_LOWER[1], false),
            Constraint::coordinate_bound("feed_max", 2, 1, BOX_UPPER[1], true),
        ];
        ProblemSpec::new(
            "turning",
            objective,
            constraints,
            self.smoothness,
            self.lipschitz,
            START.to_vec(),
        )
        .and_then(|p| p.with_bounds(Bounds::new(BOX_LOWER.to_vec(), BOX_UPPER.to_vec())))
        .expect("default turning start is strictly feasible")
    }
}

fn box_residual(x: &[f64], k: usize) -> Result<f64, DomainError> {
    let j = k / 2;
    match k {
        0 | 2 => Ok(BOX_LOWER[j] - x[j]),
        1 | 3 => Ok(x[j] - BOX_UPPER[j]),
        _ => Err(DomainError::UnknownFunction(format!("box residual {k}"))),
    }
}

/// Evaluates a turning function with the default coefficients.
pub fn turning_eval(x: &[f64], which: TurningFunction) -> Result<f64, DomainError> {
    TurningModel::default().eval(x, which)
}

/// The turning problem with default coefficients.
pub fn turning() -> ProblemSpec {
    TurningModel::default().problem()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::central_difference;
    use approx::assert_relative_eq;

    // Independent evaluation in unscaled cutting speed.
    fn tool_life_unscaled(v: f64, f: f64) -> f64 {
        127.5365 - 0.84629 * v - 144.21 * f + 0.001703 * v * v + 0.3656 * v * f
    }

    fn roughness_unscaled(v: f64, f: f64) -> f64 {
        0.7844 - 0.010035 * v + 7.0877 * f + 0.000034 * v * v - 0.018969 * v * f
    }

    #[test]
    fn start_point_values() {
        let m = TurningModel::default();
        let x = START;
        assert_relative_eq!(
            m.tool_life(&x),
            tool_life_unscaled(150.0, 0.09),
            epsilon = 1e-12
        );
        assert_relative_eq!(m.tool_life(&x), 30.8672, epsilon = 1e-4);
        assert_relative_eq!(
            m.roughness(&x),
            roughness_unscaled(150.0, 0.09),
            epsilon = 1e-12
        );
        assert_relative_eq!(m.roughness(&x), 0.4259615, epsilon = 1e-6);
        assert_relative_eq!(
            turning_eval(&x, TurningFunction::Roughness).unwrap(),
            -0.2740385,
            epsilon = 1e-6
        );
        let t = tool_life_unscaled(150.0, 0.09);
        let cost = 1.0 / (150.0 * 0.09) * (50.0 + 40.0 / t);
        assert_relative_eq!(
            turning_eval(&x, TurningFunction::Cost).unwrap(),
            cost,
            epsilon = 1e-12
        );
        assert_relative_eq!(cost, 3.7997, epsilon = 1e-4);
    }

    #[test]
    fn box_residuals() {
        assert_eq!(
            turning_eval(&[0.1, 0.1], TurningFunction::Box(0)).unwrap(),
            0.0
        );
        assert_relative_eq!(
            turning_eval(&START, TurningFunction::Box(1)).unwrap(),
            -0.05,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            turning_eval(&START, TurningFunction::Box(2)).unwrap(),
            -0.01,
            epsilon = 1e-15
        );
        assert!(turning_eval(&START, TurningFunction::Box(4)).is_err());
    }

    #[test]
    fn nonpositive_tool_life_is_a_domain_error() {
        // T = 127.5 - 144.21 f at v = 0 vanishes near f = 0.884.
        let err = turning_eval(&[0.0, 0.9], TurningFunction::Cost).unwrap_err();
        assert!(matches!(err, DomainError::ToolLife { .. }));
    }

    #[test]
    fn tool_life_positive_on_box() {
        let m = TurningModel::default();
        for a in 0..=20 {
            for b in 0..=20 {
                let x = [0.1 + 0.005 * a as f64, 0.08 + 0.004 * b as f64];
                assert!(m.tool_life(&x) > 0.0);
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let m = TurningModel::default();
        for x in [[0.15, 0.09], [0.11, 0.15], [0.19, 0.085]] {
            let fd = central_difference(|y| m.cost(y).unwrap(), &x, 1e-7);
            let g = m.cost_gradient(&x);
            for j in 0..2 {
                assert_relative_eq!(g[j], fd[j], max_relative = 1e-6);
            }
            let fd = central_difference(|y| m.roughness(y), &x, 1e-7);
            let g = m.roughness_gradient(&x);
            for j in 0..2 {
                assert_relative_eq!(g[j], fd[j], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn problem_layout() {
        let p = turning();
        assert_eq!(p.dimension, 2);
        assert_eq!(p.constraint_count(), 5);
        assert!(!p.is_known_exactly(1));
        assert!((2..=5).all(|i| p.is_known_exactly(i)));
        assert_eq!(p.constraint_lipschitz(1), 7.0);
        assert_eq!(p.constraint_lipschitz(2), 1.0);
        let slack: f64 = p
            .constraint_values(&p.start)
            .iter()
            .map(|v| -v)
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(slack, 0.01, epsilon = 1e-12);
    }
}
