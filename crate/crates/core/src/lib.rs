//! Safe zeroth-order log-barrier optimization.
//!
//! Minimizes an unknown smooth objective subject to unknown smooth
//! inequality constraints `f_i(x) <= 0` using only function values, which
//! may be corrupted by sub-Gaussian noise. Every measured point stays inside
//! the feasible set: probe radii and step sizes are capped by the current
//! constraint slack and the constraints' Lipschitz constant.
//!
//! Two variants are provided:
//!
//! - **0-LBM** ([`Mode::Exact`]): exact function values, forward finite
//!   differences with `d + 1` oracle calls per iteration.
//! - **s0-LBM** ([`Mode::Stochastic`]): noisy values, each probe point is
//!   measured `n_t` times and constraint slacks are replaced by upper
//!   confidence bounds.
//!
//! The best iterate of a barrier subproblem is the one minimizing
//! `gamma_t * ||g_t||^2`; [`solver::certify_kkt`] checks whether it is an
//! approximate scaled KKT point.
//!
//! ```
//! use safezo::{problems, solver::{self, SolverConfig}};
//!
//! let problem = problems::linear_1d();
//! let config = SolverConfig::exact(0.1).with_rounds(1, 5.0);
//! let report = solver::solve(&problem, &config).unwrap();
//! let x = &report.rounds[0].selected_record().x;
//! assert!((x[0] - 0.1).abs() < 0.02);
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use oracle::{Ledger, LedgerMode, NoiseKind, NoiseModel, Oracle, ProblemSpec};
pub use solver::{Mode, SolverConfig};
