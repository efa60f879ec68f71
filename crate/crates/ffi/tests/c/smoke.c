#include <math.h>
#include <stdio.h>
#include "dpd.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        DpdStatus st_ = (call);                                            \
        if (st_ != DPD_STATUS_OK) {                                        \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,             \
                    dpd_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke <scenario.json> <out-dir>\n");
        return 2;
    }
    DpdScenario *scenario = NULL;
    CHECK(dpd_scenario_load(argv[1], &scenario));

    size_t n = 0, m = 0;
    CHECK(dpd_scenario_shape(scenario, &n, &m));
    if (n != 3 || m != 2) return 1;

    double x_star[2], f_star;
    CHECK(dpd_oracle(scenario, x_star, 2, &f_star));

    DpdStepSizeReport report;
    CHECK(dpd_validate(scenario, &report));
    if (!report.spectral_ok || report.kappa_n != 1.0) return 1;

    DpdSolver *solver = NULL;
    CHECK(dpd_solver_new(scenario, &solver));
    CHECK(dpd_solver_step(solver, 6000));
    double x[6];
    CHECK(dpd_solver_primal(solver, x, 6));
    for (size_t i = 0; i < 6; i++) {
        if (fabs(x[i] - x_star[i % 2]) > 1e-6) {
            fprintf(stderr, "agent %zu coordinate %zu: %g vs %g\n", i / 2, i % 2, x[i], x_star[i % 2]);
            return 1;
        }
    }
    if (dpd_solver_primal(solver, x, 5) != DPD_STATUS_BUFFER_TOO_SMALL) return 1;

    CHECK(dpd_run(scenario, DPD_ALGORITHM_PD, argv[2]));
    dpd_solver_free(solver);
    dpd_scenario_free(scenario);
    printf("ok %s x* = (%.12f, %.12f)\n", dpd_version(), x_star[0], x_star[1]);
    return 0;
}
