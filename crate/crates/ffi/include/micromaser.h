#ifndef MICROMASER_H
#define MICROMASER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmStatus {
  MM_STATUS_OK = 0,
  MM_STATUS_NULL_POINTER = 1,
  MM_STATUS_INVALID_ARGUMENT = 2,
  MM_STATUS_TRUNCATION_TOO_SMALL = 3,
  MM_STATUS_INCOMPATIBLE_LENGTH = 4,
  MM_STATUS_BUFFER_TOO_SMALL = 5,
  MM_STATUS_PANIC = 6,
} MmStatus;

/**
 * Opaque probe-atom kernel.
 */
typedef struct MmKernel MmKernel;

/**
 * Opaque reconstruction result.
 */
typedef struct MmReconstruction MmReconstruction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version.
 */
const char *mm_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mm_last_error(char *buf, size_t len);

/**
 * Steady-state distribution `p_0..=p_truncation` into `out` (`truncation + 1` values).
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum MmStatus mm_steady_state(double n_ex,
                              double n_th,
                              double theta,
                              size_t truncation,
                              double *out,
                              size_t out_len);

/**
 * # Safety
 * `out` must point to a writable double.
 */
enum MmStatus mm_trapping_theta(double n_ex, uint32_t q, uint32_t n_q, double *out);

/**
 * Mean, variance and Fano factor of a distribution (normalized on input).
 * `fano_defined` is set to false for the vacuum, in which case `fano` is 0.
 *
 * # Safety
 * `probs` must point to `len` doubles; the remaining pointers to writable values.
 */
enum MmStatus mm_metrics(const double *probs,
                         size_t len,
                         double *mean,
                         double *variance,
                         double *fano,
                         bool *fano_defined);

/**
 * Fidelity `sum_n sqrt(p_n q_n)` of two distributions, each normalized on input.
 *
 * # Safety
 * `p` and `q` must point to `p_len` and `q_len` doubles; `out` to a writable double.
 */
enum MmStatus mm_fidelity(const double *p,
                          size_t p_len,
                          const double *q,
                          size_t q_len,
                          double *out);

/**
 * Builds the kernel for a uniform grid of `n_tau + 1` interaction times.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum MmStatus mm_kernel_new(double tau_min,
                            double tau_max,
                            size_t n_tau,
                            size_t truncation,
                            struct MmKernel **out);

/**
 * # Safety
 * `kernel` must be null or a handle from [`mm_kernel_new`] not yet freed.
 */
void mm_kernel_free(struct MmKernel *kernel);

/**
 * Number of interaction times; 0 for a null handle.
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
size_t mm_kernel_rows(const struct MmKernel *kernel);

/**
 * Number of photon numbers (`truncation + 1`); 0 for a null handle.
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
size_t mm_kernel_cols(const struct MmKernel *kernel);

/**
 * Excited-state probability at every grid time for distribution `probs`.
 *
 * # Safety
 * `kernel` must be a live handle, `probs` must point to `len` doubles and
 * `out` to `out_len` writable doubles.
 */
enum MmStatus mm_excited_probability(const struct MmKernel *kernel,
                                     const double *probs,
                                     size_t len,
                                     double *out,
                                     size_t out_len);

/**
 * Simulated excited-atom counts, one per grid time (`n_tau + 1` values).
 *
 * # Safety
 * `out_counts` must point to `out_len` writable `uint32_t`.
 */
enum MmStatus mm_simulate(double n_ex,
                          double n_th,
                          double theta,
                          double tau_min,
                          double tau_max,
                          size_t n_tau,
                          size_t truncation,
                          uint32_t shots_per_tau,
                          uint64_t seed,
                          uint32_t *out_counts,
                          size_t out_len);

/**
 * Log-likelihood of distribution `probs` given excited fractions `freqs`.
 * Writes negative infinity when the data are impossible under `probs`.
 *
 * # Safety
 * Pointers must reference `freqs_len` and `probs_len` doubles and a writable double.
 */
enum MmStatus mm_log_likelihood(const struct MmKernel *kernel,
                                const double *freqs,
                                size_t freqs_len,
                                const double *probs,
                                size_t probs_len,
                                double *out);

/**
 * EM reconstruction from the uniform distribution.
 *
 * # Safety
 * `kernel` must be a live handle, `freqs` must point to `freqs_len` doubles
 * and `out` to a writable handle slot.
 */
enum MmStatus mm_reconstruct(const struct MmKernel *kernel,
                             const double *freqs,
                             size_t freqs_len,
                             size_t max_iterations,
                             double stop_tolerance,
                             struct MmReconstruction **out);

/**
 * # Safety
 * `result` must be null or a handle from [`mm_reconstruct`] not yet freed.
 */
void mm_reconstruction_free(struct MmReconstruction *result);

/**
 * Length of the estimate (`truncation + 1`); 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t mm_reconstruction_len(const struct MmReconstruction *result);

/**
 * Iterations actually run (equals the length of the likelihood trace).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t mm_reconstruction_iterations(const struct MmReconstruction *result);

/**
 * `max_n |T p_n - p_n|` at the estimate; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double mm_reconstruction_residual(const struct MmReconstruction *result);

/**
 * # Safety
 * `result` must be a live handle and `out` must point to `out_len` writable doubles.
 */
enum MmStatus mm_reconstruction_estimate(const struct MmReconstruction *result,
                                         double *out,
                                         size_t out_len);

/**
 * # Safety
 * `result` must be a live handle and `out` must point to `out_len` writable doubles.
 */
enum MmStatus mm_reconstruction_loglik_trace(const struct MmReconstruction *result,
                                             double *out,
                                             size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICROMASER_H */
