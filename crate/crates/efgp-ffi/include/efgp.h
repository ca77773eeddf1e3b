/* C interface for the efgp Gaussian process library. */

#ifndef EFGP_H
#define EFGP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel family selector.
 */
typedef enum EfgpKernel {
  EfgpKernelSe = 0,
  EfgpKernelMatern = 1,
} EfgpKernel;

/**
 * Status codes returned by every API call.
 */
typedef enum EfgpStatus {
  EfgpOk = 0,
  /**
   * Input outside a mathematical domain (e.g. points off the unit cube).
   */
  EfgpErrDomain = 1,
  /**
   * Structurally invalid argument (null pointer, bad sizes, bad family).
   */
  EfgpErrArgument = 2,
  /**
   * A theorem hypothesis fails, so no rigorous parameters exist.
   */
  EfgpErrHypothesis = 3,
  /**
   * Problem size exceeds a configured cap.
   */
  EfgpErrResource = 4,
  /**
   * Dense linear algebra failure.
   */
  EfgpErrLinalg = 5,
  /**
   * File I/O failure.
   */
  EfgpErrIo = 6,
  /**
   * Malformed serialized input.
   */
  EfgpErrParse = 7,
  /**
   * Iteration failed to converge.
   */
  EfgpErrConvergence = 8,
  /**
   * Internal panic; state may be inconsistent.
   */
  EfgpErrInternal = 9,
} EfgpStatus;

/**
 * Opaque fitted-model handle.
 */
typedef struct EfgpModelHandle EfgpModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *efgp_last_error(void);

/**
 * Resolve rigorous grid parameters (h, m) meeting uniform kernel error
 * `eps` for the given kernel; `nu` is ignored for the SE family.
 */
enum EfgpStatus efgp_params(enum EfgpKernel family,
                            double lengthscale,
                            double nu,
                            size_t d,
                            double eps,
                            double *h_out,
                            size_t *m_out);

/**
 * Fit a model to `n` points (row-major n x d) with targets `y`. Pass the
 * (h, m) pair from `efgp_params` or any explicit admissible choice. On
 * success `*model_out` owns the handle; free it with `efgp_model_free`.
 */
enum EfgpStatus efgp_fit(enum EfgpKernel family,
                         double lengthscale,
                         double nu,
                         size_t d,
                         const double *points,
                         const double *y,
                         size_t n,
                         double sigma,
                         double h,
                         size_t m,
                         double cg_tol,
                         struct EfgpModelHandle **model_out);

/**
 * Posterior mean at `nt` targets (row-major nt x d) into `out` (nt values).
 */
enum EfgpStatus efgp_predict_mean(const struct EfgpModelHandle *model,
                                  const double *targets,
                                  size_t nt,
                                  double *out);

/**
 * Posterior variance at `nt` targets into `out`. Runs one CG solve per
 * target at tolerance `cg_tol`; not reentrant on a shared handle.
 */
enum EfgpStatus efgp_predict_var(struct EfgpModelHandle *model,
                                 const double *targets,
                                 size_t nt,
                                 double cg_tol,
                                 double *out);

/**
 * Dimension d of a fitted model.
 */
size_t efgp_model_dim(const struct EfgpModelHandle *model);

/**
 * Total mode count M = (2m+1)^d of a fitted model.
 */
size_t efgp_model_modes(const struct EfgpModelHandle *model);

/**
 * CG iterations spent fitting the model.
 */
size_t efgp_model_iterations(const struct EfgpModelHandle *model);

/**
 * Save a model: summary JSON at `json_path`, coefficients at `beta_path`.
 */
enum EfgpStatus efgp_model_save(const struct EfgpModelHandle *model,
                                const char *json_path,
                                const char *beta_path);

/**
 * Load a model saved with `efgp_model_save`.
 */
enum EfgpStatus efgp_model_load(const char *json_path,
                                const char *beta_path,
                                struct EfgpModelHandle **model_out);

/**
 * Release a model handle. Null is a no-op.
 */
void efgp_model_free(struct EfgpModelHandle *model);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EFGP_H */
