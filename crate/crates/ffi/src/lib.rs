//! C ABI for `safezo`.
//!
//! Problems, configurations and reports are opaque handles created and
//! released through this API. Every fallible call returns an [`SzStatus`];
//! the message of the most recent failure on the calling thread is
//! available from [`sz_last_error`].
//!
//! ```c
//! SzProblem *p = NULL;
//! SzConfig *c = sz_config_exact(0.1);
//! SzReport *r = NULL;
//! if (sz_problem_builtin("linear_1d", &p) == SZ_STATUS_OK &&
//!     sz_solve(p, c, &r) == SZ_STATUS_OK) {
//!     double x[1];
//!     sz_report_selected_x(r, x, 1);
//! }
//! sz_report_free(r);
//! sz_config_free(c);
//! sz_problem_free(p);
//! ```

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use safezo::oracle::{Constraint, ProblemSpec, SmoothFunction};
use safezo::problems;
use safezo::solver::{self, SolveReport, SolverConfig, SolverError};

/// Result of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    /// The solve stopped early; a partial report is still returned.
    SlackExhausted = 4,
    SolverFailure = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Problem handle.
pub struct SzProblem(ProblemSpec);

/// Solver configuration handle.
pub struct SzConfig(SolverConfig);

/// Solve result handle.
pub struct SzReport(SolveReport);

/// Black-box evaluator: returns `f_index(x)` for `x` of length `dimension`;
/// index 0 is the objective, 1..=m the constraints `f_i(x) <= 0`.
pub type SzEvaluate =
    extern "C" fn(x: *const f64, dimension: usize, index: usize, user_data: *mut c_void) -> f64;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: SzStatus, msg: impl Into<String>) -> SzStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SzStatus) -> SzStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(SzStatus::Panic, "panic inside safezo"))
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn sz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a built-in problem: `turning`, `linear_1d` or `disk_quadratic`.
#[no_mangle]
pub unsafe extern "C" fn sz_problem_builtin(
    name: *const c_char,
    out: *mut *mut SzProblem,
) -> SzStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(SzStatus::NullPointer, "null argument");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(SzStatus::InvalidArgument, "problem name is not UTF-8");
        };
        match problems::by_name(name) {
            Some(p) => {
                *out = Box::into_raw(Box::new(SzProblem(p)));
                SzStatus::Ok
            }
            None => fail(
                SzStatus::UnknownProblem,
                format!("unknown problem `{name}`"),
            ),
        }
    })
}

/// Creates a seeded random quadratic instance on `[-1, 1]^d`.
#[no_mangle]
pub unsafe extern "C" fn sz_problem_random(
    dimension: usize,
    constraints: usize,
    seed: u64,
    smoothness: f64,
    lipschitz: f64,
    out: *mut *mut SzProblem,
) -> SzStatus {
    guard(|| {
        if out.is_null() {
            return fail(SzStatus::NullPointer, "null argument");
        }
        match problems::random_instance(dimension, constraints, seed, smoothness, lipschitz) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(SzProblem(p)));
                SzStatus::Ok
            }
            Err(e) => fail(SzStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[derive(Clone, Copy)]
struct Callback {
    evaluate: SzEvaluate,
    user_data: *mut c_void,
    dimension: usize,
}

// The caller promises the evaluator may be called from any thread.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, x: &[f64], index: usize) -> f64 {
        (self.evaluate)(x.as_ptr(), self.dimension, index, self.user_data)
    }
}

/// Creates a problem from a black-box evaluator with `constraints`
/// constraints, constants `smoothness` (M) and `lipschitz` (L), and the
/// strictly feasible start `start[0..dimension]`. `evaluate` has the
/// [`SzEvaluate`] signature. The evaluator and
/// `user_data` must outlive the problem.
#[no_mangle]
pub unsafe extern "C" fn sz_problem_custom(
    dimension: usize,
    constraints: usize,
    start: *const f64,
    smoothness: f64,
    lipschitz: f64,
    evaluate: Option<
        extern "C" fn(x: *const f64, dimension: usize, index: usize, user_data: *mut c_void) -> f64,
    >,
    user_data: *mut c_void,
    out: *mut *mut SzProblem,
) -> SzStatus {
    guard(|| {
        let Some(evaluate) = evaluate else {
            return fail(SzStatus::NullPointer, "null evaluator");
        };
        if start.is_null() || out.is_null() {
            return fail(SzStatus::NullPointer, "null argument");
        }
        if dimension == 0 {
            return fail(SzStatus::InvalidArgument, "dimension must be at least 1");
        }
        let cb = Callback {
            evaluate,
            user_data,
            dimension,
        };
        let start = std::slice::from_raw_parts(start, dimension).to_vec();
        let objective = SmoothFunction::new("f0", move |x: &[f64]| cb.call(x, 0));
        let cs = (1..=constraints)
            .map(|i| {
                Constraint::new(SmoothFunction::new(format!("f{i}"), move |x: &[f64]| {
                    cb.call(x, i)
                }))
            })
            .collect();
        match ProblemSpec::new("custom", objective, cs, smoothness, lipschitz, start) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(SzProblem(p)));
                SzStatus::Ok
            }
            Err(e) => fail(SzStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sz_problem_dimension(problem: *const SzProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.dimension)
}

#[no_mangle]
pub unsafe extern "C" fn sz_problem_constraints(problem: *const SzProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.constraint_count())
}

#[no_mangle]
pub unsafe extern "C" fn sz_problem_free(problem: *mut SzProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Exact-oracle configuration, one round, automatic iteration cap.
#[no_mangle]
pub extern "C" fn sz_config_exact(eta0: f64) -> *mut SzConfig {
    Box::into_raw(Box::new(SzConfig(SolverConfig::exact(eta0))))
}

/// Noisy-oracle configuration with Gaussian noise of level `sigma`.
#[no_mangle]
pub extern "C" fn sz_config_stochastic(eta0: f64, sigma: f64, delta: f64) -> *mut SzConfig {
    Box::into_raw(Box::new(SzConfig(SolverConfig::stochastic(
        eta0, sigma, delta,
    ))))
}

#[no_mangle]
pub unsafe extern "C" fn sz_config_set_rounds(
    config: *mut SzConfig,
    rounds: usize,
    mu: f64,
) -> SzStatus {
    match config.as_mut() {
        Some(c) => {
            c.0.rounds = rounds;
            c.0.mu = mu;
            SzStatus::Ok
        }
        None => fail(SzStatus::NullPointer, "null config"),
    }
}

/// Fixed per-round iteration cap.
#[no_mangle]
pub unsafe extern "C" fn sz_config_set_iterations(
    config: *mut SzConfig,
    iterations: usize,
) -> SzStatus {
    match config.as_mut() {
        Some(c) => {
            c.0.iterations = solver::IterationCap::Fixed(iterations);
            SzStatus::Ok
        }
        None => fail(SzStatus::NullPointer, "null config"),
    }
}

#[no_mangle]
pub unsafe extern "C" fn sz_config_set_seed(config: *mut SzConfig, seed: u64) -> SzStatus {
    match config.as_mut() {
        Some(c) => {
            c.0.seed = seed;
            SzStatus::Ok
        }
        None => fail(SzStatus::NullPointer, "null config"),
    }
}

/// Stops a round once `gamma_t ||g_t||^2` falls to `threshold`.
#[no_mangle]
pub unsafe extern "C" fn sz_config_set_stop_threshold(
    config: *mut SzConfig,
    threshold: f64,
) -> SzStatus {
    match config.as_mut() {
        Some(c) => {
            c.0.stop_threshold = threshold;
            SzStatus::Ok
        }
        None => fail(SzStatus::NullPointer, "null config"),
    }
}

#[no_mangle]
pub unsafe extern "C" fn sz_config_free(config: *mut SzConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the annealed solve. On `SZ_STATUS_SLACK_EXHAUSTED` the partial
/// report is still stored in `out`.
#[no_mangle]
pub unsafe extern "C" fn sz_solve(
    problem: *const SzProblem,
    config: *const SzConfig,
    out: *mut *mut SzReport,
) -> SzStatus {
    guard(|| {
        let (Some(p), Some(c)) = (problem.as_ref(), config.as_ref()) else {
            return fail(SzStatus::NullPointer, "null problem or config");
        };
        if out.is_null() {
            return fail(SzStatus::NullPointer, "null output");
        }
        *out = ptr::null_mut();
        match solver::solve(&p.0, &c.0) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(SzReport(r)));
                SzStatus::Ok
            }
            Err(SolverError::SlackExhausted { round, report }) => {
                *out = Box::into_raw(Box::new(SzReport(*report)));
                fail(
                    SzStatus::SlackExhausted,
                    format!("slack exhausted in round {round}"),
                )
            }
            Err(SolverError::InvalidConfig(msg)) => fail(SzStatus::InvalidArgument, msg),
            Err(e) => fail(SzStatus::SolverFailure, e.to_string()),
        }
    })
}

/// Copies the selected iterate into `x[0..len]`; `len` must be at least
/// the problem dimension.
#[no_mangle]
pub unsafe extern "C" fn sz_report_selected_x(
    report: *const SzReport,
    x: *mut f64,
    len: usize,
) -> SzStatus {
    let Some(r) = report.as_ref() else {
        return fail(SzStatus::NullPointer, "null report");
    };
    if x.is_null() {
        return fail(SzStatus::NullPointer, "null buffer");
    }
    let Some(sel) = r.0.selected() else {
        return fail(SzStatus::SolverFailure, "no iterate was produced");
    };
    if len < sel.x.len() {
        return fail(
            SzStatus::BufferTooSmall,
            format!("need {} entries", sel.x.len()),
        );
    }
    ptr::copy_nonoverlapping(sel.x.as_ptr(), x, sel.x.len());
    SzStatus::Ok
}

/// Total oracle calls of the run.
#[no_mangle]
pub unsafe extern "C" fn sz_report_measurements(report: *const SzReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.measurements)
}

/// Iterations over all rounds.
#[no_mangle]
pub unsafe extern "C" fn sz_report_iterations(report: *const SzReport) -> usize {
    report
        .as_ref()
        .map_or(0, |r| r.0.rounds.iter().map(|x| x.trajectory.len()).sum())
}

/// Ground-truth constraint violations found by the audit.
#[no_mangle]
pub unsafe extern "C" fn sz_report_violations(report: *const SzReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.violations.len())
}

/// 1 if the selected iterate passed the scaled-KKT check, 0 if not, -1 if
/// no check was made.
#[no_mangle]
pub unsafe extern "C" fn sz_report_kkt_passed(report: *const SzReport) -> i32 {
    match report.as_ref().and_then(|r| r.0.kkt.as_ref()) {
        Some(k) => k.passed as i32,
        None => -1,
    }
}

/// Writes the report as NUL-terminated JSON into `buf`. `written` receives
/// the required size including the terminator, also when `buf` is too small.
#[no_mangle]
pub unsafe extern "C" fn sz_report_json(
    report: *const SzReport,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> SzStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(SzStatus::NullPointer, "null report");
        };
        let json = match serde_json::to_string(&r.0) {
            Ok(j) => j,
            Err(e) => return fail(SzStatus::SolverFailure, e.to_string()),
        };
        let need = json.len() + 1;
        if !written.is_null() {
            *written = need;
        }
        if buf.is_null() || len < need {
            return fail(SzStatus::BufferTooSmall, format!("need {need} bytes"));
        }
        ptr::copy_nonoverlapping(json.as_ptr().cast::<c_char>(), buf, json.len());
        *buf.add(json.len()) = 0;
        SzStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn sz_report_free(report: *mut SzReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
