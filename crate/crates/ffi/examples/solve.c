/* Solves the built-in disk problem and prints the selected iterate.
 *
 *   cargo build -p safezo-ffi
 *   cc -I crates/ffi/include crates/ffi/examples/solve.c \
 *      target/debug/libsafezo_ffi.a -lm -lpthread -ldl -o solve
 */
#include <stdio.h>

#include "safezo.h"

int main(void) {
    SzProblem *problem = NULL;
    SzReport *report = NULL;
    double x[2];

    if (sz_problem_builtin("disk_quadratic", &problem) != SZ_STATUS_OK) {
        fprintf(stderr, "%s\n", sz_last_error());
        return 1;
    }
    SzConfig *config = sz_config_exact(0.1);
    sz_config_set_iterations(config, 500);

    SzStatus status = sz_solve(problem, config, &report);
    if (status != SZ_STATUS_OK) {
        fprintf(stderr, "solve failed: %s\n", sz_last_error());
    } else if (sz_report_selected_x(report, x, 2) == SZ_STATUS_OK) {
        printf("x = (%.6f, %.6f), %llu measurements, %zu violations\n", x[0], x[1],
               (unsigned long long)sz_report_measurements(report),
               sz_report_violations(report));
    }

    sz_report_free(report);
    sz_config_free(config);
    sz_problem_free(problem);
    return status == SZ_STATUS_OK ? 0 : 1;
}
