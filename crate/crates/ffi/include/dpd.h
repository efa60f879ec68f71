#ifndef DPD_H
#define DPD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Algorithm selector for [`dpd_run`].
typedef enum DpdAlgorithm {
  DPD_ALGORITHM_PD = 0,
  DPD_ALGORITHM_DGD_CONST = 1,
  DPD_ALGORITHM_DGD075 = 2,
  DPD_ALGORITHM_DGD04 = 3,
  DPD_ALGORITHM_ALL = 4,
} DpdAlgorithm;

// Result codes. The input, numerical, oracle and I/O codes match the exit
// codes of the `dpd` command-line tool.
typedef enum DpdStatus {
  DPD_STATUS_OK = 0,
  DPD_STATUS_NULL_POINTER = 1,
  DPD_STATUS_INVALID_STRING = 2,
  DPD_STATUS_INPUT = 3,
  DPD_STATUS_NUMERICAL = 4,
  DPD_STATUS_ORACLE = 5,
  DPD_STATUS_IO = 6,
  DPD_STATUS_BUFFER_TOO_SMALL = 7,
  DPD_STATUS_PANIC = 8,
} DpdStatus;

// Opaque scenario handle.
typedef struct DpdScenario DpdScenario;

// Opaque primal-dual iteration state bound to a scenario's problem.
typedef struct DpdSolver DpdSolver;

// Step-size admissibility. `c_r` is NaN when undefined.
typedef struct DpdStepSizeReport {
  double alpha;
  double kappa_n;
  double bound_spectral;
  double l_r;
  double bound_lipschitz;
  bool spectral_ok;
  bool lipschitz_ok;
  bool admissible;
  double r;
  double lambda_min_m;
  double lambda_min_w_shifted;
  double c_r;
  double v0;
} DpdStepSizeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library on this thread.
const char *dpd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dpd_version(void);

// Loads and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum DpdStatus dpd_scenario_load(const char *path, struct DpdScenario **out);

// Parses and validates a scenario from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum DpdStatus dpd_scenario_from_json(const char *json, struct DpdScenario **out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must come from this library and not be used afterwards.
void dpd_scenario_free(struct DpdScenario *scenario);

// Writes the agent count `n` and block dimension `m`.
//
// # Safety
// `scenario` must be a live handle; `n` and `m` writable pointers.
enum DpdStatus dpd_scenario_shape(const struct DpdScenario *scenario, size_t *n, size_t *m);

// Computes the oracle solution and the step-size report for the
// scenario's `alpha`.
//
// # Safety
// `scenario` must be a live handle and `out` writable.
enum DpdStatus dpd_validate(const struct DpdScenario *scenario, struct DpdStepSizeReport *out);

// Centralized solution: writes `x*` (length `m`) and `f*`.
//
// # Safety
// `scenario` must be a live handle, `x_star` valid for `len` writes and
// `f_star` writable.
enum DpdStatus dpd_oracle(const struct DpdScenario *scenario,
                          double *x_star,
                          size_t len,
                          double *f_star);

// Runs the selected algorithms and writes traces and `report.json` to
// `out_dir`.
//
// # Safety
// `scenario` must be a live handle and `out_dir` a NUL-terminated string.
enum DpdStatus dpd_run(const struct DpdScenario *scenario,
                       enum DpdAlgorithm algorithm,
                       const char *out_dir);

// Creates a primal-dual iteration at the scenario's initial state.
//
// # Safety
// `scenario` must be a live handle and `out` writable.
enum DpdStatus dpd_solver_new(const struct DpdScenario *scenario, struct DpdSolver **out);

// Advances the iteration by `steps` primal-dual steps. On a numerical
// failure the state is left at the last finite iterate.
//
// # Safety
// `solver` must be a live handle.
enum DpdStatus dpd_solver_step(struct DpdSolver *solver, size_t steps);

// Writes the iteration counter `k`.
//
// # Safety
// `solver` must be a live handle and `k` writable.
enum DpdStatus dpd_solver_iteration(const struct DpdSolver *solver, size_t *k);

// Copies the stacked primal iterate `X_k` (length `n·m`).
//
// # Safety
// `solver` must be a live handle and `buf` valid for `len` writes.
enum DpdStatus dpd_solver_primal(const struct DpdSolver *solver, double *buf, size_t len);

// Copies the stacked dual iterate `Λ_k` (length `n·m`).
//
// # Safety
// `solver` must be a live handle and `buf` valid for `len` writes.
enum DpdStatus dpd_solver_dual(const struct DpdSolver *solver, double *buf, size_t len);

// Releases a solver. Null is ignored.
//
// # Safety
// `solver` must come from this library and not be used afterwards.
void dpd_solver_free(struct DpdSolver *solver);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPD_H */
