#ifndef SCALAR_ENSEMBLE_H
#define SCALAR_ENSEMBLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SeStatus {
  SE_STATUS_OK = 0,
  SE_STATUS_NULL_POINTER = 1,
  SE_STATUS_INVALID_ARGUMENT = 2,
  SE_STATUS_DOMAIN = 3,
  SE_STATUS_MODEL = 4,
  SE_STATUS_HYPOTHESIS = 5,
  SE_STATUS_NUMERIC = 6,
  SE_STATUS_SINGULARITY = 7,
  SE_STATUS_UNSUPPORTED = 8,
  SE_STATUS_IO = 9,
  SE_STATUS_PANIC = 10,
} SeStatus;

/**
 * Parameter-dependent family with its parameter box.
 */
typedef struct SeEnsemble SeEnsemble;

/**
 * Chirped control pulse.
 */
typedef struct SePulse SePulse;

/**
 * One realization of the ensemble.
 */
typedef struct SeSystem SeSystem;

/**
 * Outcome of a condition check.
 */
typedef struct SeCheckResult {
  /**
   * 1 if every hypothesis holds, 0 otherwise.
   */
  int holds;
  size_t violations;
  size_t warnings;
} SeCheckResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *se_last_error(void);

/**
 * Forget the stored error message of this thread.
 */
void se_clear_error(void);

/**
 * Build a system from `n` strictly increasing eigenvalues and a symmetric
 * row-major `n x n` coupling matrix.
 *
 * # Safety
 * `lambda` must point to `n` doubles and `coupling` to `n * n` doubles.
 */
enum SeStatus se_system_new(size_t n,
                            const double *lambda,
                            const double *coupling,
                            struct SeSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from this library that was not freed yet.
 */
void se_system_free(struct SeSystem *sys);

/**
 * Number of levels, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t se_system_levels(const struct SeSystem *sys);

/**
 * Copy the eigenvalues into `out`, which holds `len` doubles.
 *
 * # Safety
 * `sys` must be a live handle and `out` must point to `len` doubles.
 */
enum SeStatus se_system_lambda(const struct SeSystem *sys, double *out, size_t len);

/**
 * The four-level benchmark family on `alpha in [lo, hi]`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SeStatus se_ensemble_four_level(double lo, double hi, struct SeEnsemble **out);

/**
 * Affine family `lambda_j(alpha) = offset_j + <slope_j, alpha>` with a fixed
 * coupling over the box `prod [lo_i, hi_i]`.
 *
 * # Safety
 * `offset` points to `n` doubles, `slope` to `n * dim` doubles (row `j` is
 * the gradient of level `j`), `coupling` to `n * n` doubles in row-major
 * order, `lo` and `hi` to `dim` doubles each.
 */
enum SeStatus se_ensemble_affine(size_t n,
                                 size_t dim,
                                 const double *offset,
                                 const double *slope,
                                 const double *coupling,
                                 const double *lo,
                                 const double *hi,
                                 struct SeEnsemble **out);

/**
 * # Safety
 * `ens` must be null or a live handle.
 */
void se_ensemble_free(struct SeEnsemble *ens);

/**
 * Realization at `alpha` (length `dim`) with every coupling sampled at the
 * same relative position `t in [0, 1]` of its interval.
 *
 * # Safety
 * `ens` must be a live handle and `alpha` must point to `dim` doubles.
 */
enum SeStatus se_ensemble_sample(const struct SeEnsemble *ens,
                                 const double *alpha,
                                 size_t dim,
                                 double t,
                                 struct SeSystem **out);

/**
 * Check the transfer hypotheses for `p -> q` with sweep window `(v0, v1)`.
 * With `doubled != 0` the gaps must also avoid `[2 v0, 2 v1]`.
 *
 * # Safety
 * `ens` must be a live handle and `out` a valid pointer.
 */
enum SeStatus se_check_conditions(const struct SeEnsemble *ens,
                                  size_t p,
                                  size_t q,
                                  double v0,
                                  double v1,
                                  double margin,
                                  int doubled,
                                  struct SeCheckResult *out);

/**
 * Linear chirp from `v0` to `v1` under the sine envelope.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SeStatus se_pulse_standard(double v0,
                                double v1,
                                double eps1,
                                double eps2,
                                struct SePulse **out);

/**
 * # Safety
 * `pulse` must be null or a live handle.
 */
void se_pulse_free(struct SePulse *pulse);

/**
 * Physical duration of the pulse, or NaN for a null handle.
 *
 * # Safety
 * `pulse` must be null or a live handle.
 */
double se_pulse_horizon(const struct SePulse *pulse);

/**
 * Control amplitude at physical time `t`.
 *
 * # Safety
 * `pulse` must be a live handle and `out` a valid pointer.
 */
enum SeStatus se_pulse_omega(const struct SePulse *pulse, double t, double *out);

/**
 * Propagate `e_initial` over the whole pulse and write the final amplitudes
 * into `re` and `im` (`len` entries each). `max_norm_drift` may be null.
 *
 * Returns `SeStatus::Numeric` if the norm drift exceeds the accuracy limit;
 * the amplitudes are still written in that case.
 *
 * # Safety
 * Handles must be live; `re` and `im` must point to `len` doubles.
 */
enum SeStatus se_propagate(const struct SeSystem *sys,
                           const struct SePulse *pulse,
                           size_t initial,
                           size_t steps_per_period,
                           double *re,
                           double *im,
                           size_t len,
                           double *max_norm_drift);

/**
 * Distance of the unit state `re + i im` from the ray through `e_q`.
 *
 * # Safety
 * `re` and `im` must point to `n` doubles and `out` must be valid.
 */
enum SeStatus se_distance_to_target(const double *re,
                                    const double *im,
                                    size_t n,
                                    size_t q,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCALAR_ENSEMBLE_H */
