#ifndef RULAB_H
#define RULAB_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RulabStatus {
  RULAB_STATUS_OK = 0,
  RULAB_STATUS_NULL_POINTER = 1,
  RULAB_STATUS_DOMAIN = 2,
  RULAB_STATUS_UNSUPPORTED = 3,
  RULAB_STATUS_NO_CONVERGENCE = 4,
  RULAB_STATUS_OVERFLOW = 5,
  RULAB_STATUS_CONFIG = 6,
  RULAB_STATUS_BUFFER_TOO_SMALL = 7,
  RULAB_STATUS_PANIC = 8,
} RulabStatus;

typedef enum RulabSolveStatus {
  RULAB_SOLVE_STATUS_CONVERGED = 0,
  RULAB_SOLVE_STATUS_COLLAPSED_TO_ZERO = 1,
  RULAB_SOLVE_STATUS_DIVERGED = 2,
  RULAB_SOLVE_STATUS_MAX_ITER = 3,
} RulabSolveStatus;

/**
 * Opaque model handle.
 */
typedef struct RulabModel RulabModel;

/**
 * Opaque preference handle.
 */
typedef struct RulabPreferences RulabPreferences;

typedef struct RulabLambdaEstimate {
  double lambda_p;
  double rho_hat;
  double std_error;
  double lambda_std_error;
  double rho_hat_half;
} RulabLambdaEstimate;

typedef struct RulabSolveResult {
  enum RulabSolveStatus status;
  size_t iterations;
  double final_residual;
  /**
   * Number of grid nodes; entries written to the output buffer.
   */
  size_t len;
} RulabSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `rulab_*` call on the same thread.
 */
const char *rulab_last_error_message(void);

/**
 * Static version string.
 */
const char *rulab_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum RulabStatus rulab_preferences_new(double beta,
                                       double gamma,
                                       double psi,
                                       struct RulabPreferences **out);

/**
 * # Safety
 * `prefs` must be NULL or a handle from this library not yet freed.
 */
void rulab_preferences_free(struct RulabPreferences *prefs);

/**
 * `theta = (1 - gamma) / (1 - 1/psi)`.
 *
 * # Safety
 * `prefs` must be a live handle and `out` writable.
 */
enum RulabStatus rulab_preferences_theta(const struct RulabPreferences *prefs, double *out);

/**
 * `beta * rho^(1/theta)` for a given spectral radius.
 *
 * # Safety
 * `prefs` must be a live handle and `out` writable.
 */
enum RulabStatus rulab_stability_coefficient(const struct RulabPreferences *prefs,
                                             double rho,
                                             double *out);

/**
 * Constant-volatility long-run risk model.
 *
 * # Safety
 * `out` must be writable.
 */
enum RulabStatus rulab_model_by_constant_vol(double mu_c,
                                             double rho,
                                             double sigma,
                                             struct RulabModel **out);

/**
 * Stochastic-volatility model with the monthly reference calibration.
 *
 * # Safety
 * `out` must be writable.
 */
enum RulabStatus rulab_model_by_stoch_vol_reference(struct RulabModel **out);

/**
 * Finite Markov chain from row-major `n x n` transition and growth tables.
 *
 * # Safety
 * `transition` and `growth` must each point to `n * n` readable doubles.
 */
enum RulabStatus rulab_model_finite_chain(size_t n,
                                          const double *transition,
                                          const double *growth,
                                          struct RulabModel **out);

/**
 * One-state model whose valuation operator is multiplication by `kernel`.
 *
 * # Safety
 * `prefs` must be a live handle and `out` writable.
 */
enum RulabStatus rulab_model_singleton(double kernel,
                                       const struct RulabPreferences *prefs,
                                       struct RulabModel **out);

/**
 * Loads the `[model]` and `[preferences]` sections of a TOML run config.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_model` and `out_prefs` writable.
 */
enum RulabStatus rulab_model_from_config(const char *path,
                                         struct RulabModel **out_model,
                                         struct RulabPreferences **out_prefs);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void rulab_model_free(struct RulabModel *model);

/**
 * State-space dimension of the model.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t rulab_model_dim(const struct RulabModel *model);

/**
 * Monte Carlo estimate of `Lambda_p` from stationary initial states.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum RulabStatus rulab_estimate_lambda(const struct RulabModel *model,
                                       const struct RulabPreferences *prefs,
                                       double p,
                                       size_t n,
                                       size_t m,
                                       size_t paths,
                                       uint64_t seed,
                                       struct RulabLambdaEstimate *out);

/**
 * Spectral radius of the discretized operator by power iteration.
 * `nodes` and `span` are ignored for finite chains.
 *
 * # Safety
 * Handles must be live and `out_rho` writable.
 */
enum RulabStatus rulab_spectral_radius(const struct RulabModel *model,
                                       const struct RulabPreferences *prefs,
                                       size_t nodes,
                                       double span,
                                       double tol,
                                       size_t max_iter,
                                       double *out_rho);

/**
 * Fixed point of the one-state time-preference operator. Writes
 * `has_solution = false` when `beta * k^(1/theta) >= 1`.
 *
 * # Safety
 * `prefs` must be live; `out_g` and `has_solution` writable.
 */
enum RulabStatus rulab_scalar_closed_form(const struct RulabPreferences *prefs,
                                          double k,
                                          double xi,
                                          double *out_g,
                                          bool *has_solution);

/**
 * Iterates the time-preference operator with constant `lambda` from
 * `g = initial` on the model grid. Writes the solution to `out_g` when the
 * iteration converges or stops at `max_iter`.
 *
 * # Safety
 * Handles must be live, `out_g` must hold `out_len` doubles (it may be NULL
 * when `out_len` is 0) and `out_result` must be writable.
 */
enum RulabStatus rulab_solve(const struct RulabModel *model,
                             const struct RulabPreferences *prefs,
                             size_t nodes,
                             double span,
                             double lambda,
                             double initial,
                             double tol,
                             size_t max_iter,
                             double *out_g,
                             size_t out_len,
                             struct RulabSolveResult *out_result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RULAB_H */
