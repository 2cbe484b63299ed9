#ifndef AIRY_FLOW_H
#define AIRY_FLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AfStatus {
  AF_STATUS_OK = 0,
  AF_STATUS_NULL_POINTER = 1,
  AF_STATUS_INVALID_ARGUMENT = 2,
  AF_STATUS_PARSE_ERROR = 3,
  AF_STATUS_BLOW_UP = 4,
  AF_STATUS_BUFFER_TOO_SMALL = 5,
  AF_STATUS_IO = 6,
  AF_STATUS_INTERNAL = 7,
} AfStatus;

/**
 * Opaque solver handle.
 */
typedef struct AfSolver AfSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t af_last_error_message(char *buf, size_t len);

/**
 * Creates a solver for a catalog shape.
 *
 * `shape` is one of `circle` (r), `ellipse` (a, b), `perturbed_circle`
 * (r0, delta0, m), `e`, `e1`, `e2`, `e3`, `pc3`, `cardioid`; `params` holds
 * `n_params` values. `scheme` is `adb`, `cn` or `cnadb`; `filter` is
 * `none`, `dpr`, `krasny` or `both` (null means `none`).
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `params` must be valid for
 * `n_params` reads; `out` must be valid for one write.
 */
enum AfStatus af_solver_new(const char *shape,
                            const double *params,
                            size_t n_params,
                            size_t n,
                            double dt,
                            const char *scheme,
                            const char *filter,
                            struct AfSolver **out);

/**
 * Releases a solver. Null is ignored.
 *
 * # Safety
 * `h` must come from [`af_solver_new`] and not be used afterwards.
 */
void af_solver_free(struct AfSolver *h);

/**
 * Advances by `steps` time steps. After `AF_STATUS_BLOW_UP` the solver is
 * left at the last good state.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum AfStatus af_solver_advance(struct AfSolver *h, size_t steps);

/**
 * Current time and number of nodes.
 *
 * # Safety
 * `h` must be a live handle; `time` and `n` must be null or valid for one
 * write.
 */
enum AfStatus af_solver_info(const struct AfSolver *h, double *time, size_t *n);

/**
 * Writes the curvature at the `n` nodes into `k`.
 *
 * # Safety
 * `h` must be a live handle; `k` must be valid for `len` writes.
 */
enum AfStatus af_solver_curvature(const struct AfSolver *h, double *k, size_t len);

/**
 * Writes the node coordinates into `x` and `y`.
 *
 * # Safety
 * `h` must be a live handle; `x` and `y` must each be valid for `len` writes.
 */
enum AfStatus af_solver_points(const struct AfSolver *h, double *x, double *y, size_t len);

/**
 * Conserved quantities `M1 = ∮k ds`, `M2 = ∮k² ds`, `M3 = ∮(k_s²/2 − k⁴/8) ds`
 * of the current state.
 *
 * # Safety
 * `h` must be a live handle; `out` must be valid for 3 writes.
 */
enum AfStatus af_solver_conserved(const struct AfSolver *h, double *out);

/**
 * Runs a TOML experiment or convergence config and writes its outputs.
 * A non-null `out_dir` overrides the configured output directory.
 *
 * # Safety
 * `config` must be NUL-terminated; `out_dir` must be null or NUL-terminated.
 */
enum AfStatus af_run_config(const char *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRY_FLOW_H */
