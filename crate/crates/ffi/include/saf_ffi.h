#ifndef SAF_FFI_H
#define SAF_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SAF_ALGO_SAF 0

#define SAF_ALGO_AF 1

#define SAF_ALGO_WF 2

typedef enum SafErrorCode {
  SAF_ERROR_CODE_OK = 0,
  SAF_ERROR_CODE_NULL_POINTER = 1,
  SAF_ERROR_CODE_INVALID_ARGUMENT = 2,
  SAF_ERROR_CODE_DIMENSION_MISMATCH = 3,
  SAF_ERROR_CODE_DOMAIN = 4,
  SAF_ERROR_CODE_DEGENERATE_SPECTRUM = 5,
  SAF_ERROR_CODE_PARSE = 6,
  SAF_ERROR_CODE_IO = 7,
  SAF_ERROR_CODE_PANIC = 8,
} SafErrorCode;

/**
 * Values written to `status` by [`saf_solve`].
 */
typedef enum SafSolverStatus {
  SAF_SOLVER_STATUS_MAX_ITERS = 0,
  SAF_SOLVER_STATUS_GRAD_CONVERGED = 1,
  SAF_SOLVER_STATUS_NMSE_CONVERGED = 2,
  SAF_SOLVER_STATUS_FAILED = 3,
} SafSolverStatus;

/**
 * Opaque measurement model.
 */
typedef struct SafModel SafModel;

/**
 * Opaque amplitude vector.
 */
typedef struct SafObservation SafObservation;

/**
 * Solver options. Fill with [`saf_solve_options_default`] and adjust.
 */
typedef struct SafSolveOptions {
  /**
   * One of `SAF_ALGO_*`.
   */
  int32_t algorithm;
  /**
   * Base step; ≤ 0 selects the default for the algorithm and field.
   */
  double mu;
  /**
   * 0 selects the default (5000).
   */
  size_t max_iters;
  double k;
  double gamma;
  /**
   * Seeds the initializer's power iteration.
   */
  uint64_t seed;
} SafSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *saf_last_error_message(void);

/**
 * Dense model with i.i.d. N(0,1) (real) or CN(0,1) (complex) entries.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SafErrorCode saf_gaussian_model_new(size_t m,
                                         size_t n,
                                         int32_t complex,
                                         uint64_t seed,
                                         uint64_t stream,
                                         struct SafModel **out);

/**
 * CDP model with `masks` random masks over a 1-D transform of length
 * `rows` (when `cols` is 0) or a `rows`×`cols` 2-D transform.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SafErrorCode saf_cdp_model_new(size_t rows,
                                    size_t cols,
                                    size_t masks,
                                    int32_t complex,
                                    uint64_t seed,
                                    uint64_t stream,
                                    struct SafModel **out);

/**
 * Loads a model from its plain-text dump.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as for the constructors.
 */
enum SafErrorCode saf_model_read(const char *path, struct SafModel **out);

/**
 * # Safety
 * `model` must be null or a handle from a `saf_*model*` constructor, not yet freed.
 */
void saf_model_free(struct SafModel *model);

/**
 * Number of measurements, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t saf_model_m(const struct SafModel *model);

/**
 * Signal length, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t saf_model_n(const struct SafModel *model);

/**
 * 1 for complex signals, 0 for real (or a null handle).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t saf_model_is_complex(const struct SafModel *model);

/**
 * Measures `x` (length n). `snr_db` = ±∞ or NaN means noiseless.
 *
 * # Safety
 * `x_re` must point to n doubles; `x_im` must be null or point to n doubles;
 * `model` must be a live handle; `out` as for the constructors.
 */
enum SafErrorCode saf_observe(const struct SafModel *model,
                              const double *x_re,
                              const double *x_im,
                              size_t n,
                              double snr_db,
                              uint64_t seed,
                              uint64_t stream,
                              struct SafObservation **out);

/**
 * Wraps `m` nonnegative amplitudes.
 *
 * # Safety
 * `b` must point to `m` doubles; `out` as for the constructors.
 */
enum SafErrorCode saf_observation_from_amplitudes(const double *b,
                                                  size_t m,
                                                  struct SafObservation **out);

/**
 * # Safety
 * `obs` must be null or a live handle.
 */
size_t saf_observation_len(const struct SafObservation *obs);

/**
 * Copies the amplitudes into `out`, which must hold exactly `len` values.
 *
 * # Safety
 * `obs` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SafErrorCode saf_observation_amplitudes(const struct SafObservation *obs,
                                             double *out,
                                             size_t len);

/**
 * # Safety
 * `obs` must be null or a live handle, not yet freed.
 */
void saf_observation_free(struct SafObservation *obs);

/**
 * SAF with k = 4, γ = 1, default step, 5000 iterations, seed 0.
 *
 * # Safety
 * `out` must point to writable storage for one options struct.
 */
enum SafErrorCode saf_solve_options_default(struct SafSolveOptions *out);

/**
 * Initializes and runs the solver without ground truth. The estimate is
 * written to `out_re`/`out_im` (length n; `out_im` may be null for real
 * models). `iterations` and `status` may be null.
 *
 * # Safety
 * Handles must be live; `options` may be null for defaults; output buffers
 * must hold `n` doubles.
 */
enum SafErrorCode saf_solve(const struct SafModel *model,
                            const struct SafObservation *obs,
                            const struct SafSolveOptions *options,
                            double *out_re,
                            double *out_im,
                            size_t n,
                            size_t *iterations,
                            enum SafSolverStatus *status);

/**
 * dist²(z, x)/‖x‖² up to a global phase (sign for `complex` = 0).
 *
 * # Safety
 * Real parts must point to n doubles; imaginary parts may be null.
 */
enum SafErrorCode saf_nmse(const double *z_re,
                           const double *z_im,
                           const double *x_re,
                           const double *x_im,
                           size_t n,
                           int32_t complex,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAF_FFI_H */
