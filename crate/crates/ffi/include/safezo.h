#ifndef SAFEZO_H
#define SAFEZO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an API call.
 */
typedef enum SzStatus {
  SZ_STATUS_OK = 0,
  SZ_STATUS_NULL_POINTER = 1,
  SZ_STATUS_INVALID_ARGUMENT = 2,
  SZ_STATUS_UNKNOWN_PROBLEM = 3,
  /**
   * The solve stopped early; a partial report is still returned.
   */
  SZ_STATUS_SLACK_EXHAUSTED = 4,
  SZ_STATUS_SOLVER_FAILURE = 5,
  SZ_STATUS_BUFFER_TOO_SMALL = 6,
  SZ_STATUS_PANIC = 7,
} SzStatus;

/**
 * Solver configuration handle.
 */
typedef struct SzConfig SzConfig;

/**
 * Problem handle.
 */
typedef struct SzProblem SzProblem;

/**
 * Solve result handle.
 */
typedef struct SzReport SzReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next call.
 */
const char *sz_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sz_version(void);

/**
 * Creates a built-in problem: `turning`, `linear_1d` or `disk_quadratic`.
 */
enum SzStatus sz_problem_builtin(const char *name, struct SzProblem **out);

/**
 * Creates a seeded random quadratic instance on `[-1, 1]^d`.
 */
enum SzStatus sz_problem_random(size_t dimension,
                                size_t constraints,
                                uint64_t seed,
                                double smoothness,
                                double lipschitz,
                                struct SzProblem **out);

/**
 * Creates a problem from a black-box evaluator with `constraints`
 * constraints, constants `smoothness` (M) and `lipschitz` (L), and the
 * strictly feasible start `start[0..dimension]`. `evaluate` has the
 * [`SzEvaluate`] signature. The evaluator and
 * `user_data` must outlive the problem.
 */
enum SzStatus sz_problem_custom(size_t dimension,
                                size_t constraints,
                                const double *start,
                                double smoothness,
                                double lipschitz,
                                double (*evaluate)(const double *x,
                                                   size_t dimension,
                                                   size_t index,
                                                   void *user_data),
                                void *user_data,
                                struct SzProblem **out);

size_t sz_problem_dimension(const struct SzProblem *problem);

size_t sz_problem_constraints(const struct SzProblem *problem);

void sz_problem_free(struct SzProblem *problem);

/**
 * Exact-oracle configuration, one round, automatic iteration cap.
 */
struct SzConfig *sz_config_exact(double eta0);

/**
 * Noisy-oracle configuration with Gaussian noise of level `sigma`.
 */
struct SzConfig *sz_config_stochastic(double eta0, double sigma, double delta);

enum SzStatus sz_config_set_rounds(struct SzConfig *config, size_t rounds, double mu);

/**
 * Fixed per-round iteration cap.
 */
enum SzStatus sz_config_set_iterations(struct SzConfig *config, size_t iterations);

enum SzStatus sz_config_set_seed(struct SzConfig *config, uint64_t seed);

/**
 * Stops a round once `gamma_t ||g_t||^2` falls to `threshold`.
 */
enum SzStatus sz_config_set_stop_threshold(struct SzConfig *config, double threshold);

void sz_config_free(struct SzConfig *config);

/**
 * Runs the annealed solve. On `SZ_STATUS_SLACK_EXHAUSTED` the partial
 * report is still stored in `out`.
 */
enum SzStatus sz_solve(const struct SzProblem *problem,
                       const struct SzConfig *config,
                       struct SzReport **out);

/**
 * Copies the selected iterate into `x[0..len]`; `len` must be at least
 * the problem dimension.
 */
enum SzStatus sz_report_selected_x(const struct SzReport *report, double *x, size_t len);

/**
 * Total oracle calls of the run.
 */
uint64_t sz_report_measurements(const struct SzReport *report);

/**
 * Iterations over all rounds.
 */
size_t sz_report_iterations(const struct SzReport *report);

/**
 * Ground-truth constraint violations found by the audit.
 */
size_t sz_report_violations(const struct SzReport *report);

/**
 * 1 if the selected iterate passed the scaled-KKT check, 0 if not, -1 if
 * no check was made.
 */
int32_t sz_report_kkt_passed(const struct SzReport *report);

/**
 * Writes the report as NUL-terminated JSON into `buf`. `written` receives
 * the required size including the terminator, also when `buf` is too small.
 */
enum SzStatus sz_report_json(const struct SzReport *report, char *buf, size_t len, size_t *written);

void sz_report_free(struct SzReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFEZO_H */
