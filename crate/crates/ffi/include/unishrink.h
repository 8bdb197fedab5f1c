#ifndef UNISHRINK_H
#define UNISHRINK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of a call.
typedef enum UsStatus {
  US_STATUS_OK = 0,
  US_STATUS_NULL_POINTER = 1,
  // Bad configuration, JSON, dimensions or hyperparameters.
  US_STATUS_INVALID_ARGUMENT = 2,
  // Non-SPD input, degenerate data or a sampler failure.
  US_STATUS_NUMERICAL = 3,
  US_STATUS_IO = 4,
  // The output buffer is shorter than required.
  US_STATUS_BUFFER_TOO_SMALL = 5,
  // A Rust panic was caught at the boundary.
  US_STATUS_INTERNAL = 6,
} UsStatus;

// Output of a precision-matrix chain.
typedef struct UsPrecisionFit UsPrecisionFit;

// A shrinkage prior with its global-scale hyperprior.
typedef struct UsPrior UsPrior;

// Output of a regression chain.
typedef struct UsRegressionFit UsRegressionFit;

// Chain schedule. Draws are kept after `burnin` sweeps, every `thin`-th.
typedef struct UsChainOptions {
  uint64_t iters;
  uint64_t burnin;
  uint64_t thin;
  uint64_t seed;
  // Keep the individual draws, not only their means.
  bool store_draws;
} UsChainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *us_version(void);

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *us_last_error(void);

// Default schedule: 15000 sweeps, 5000 burn-in, no thinning, seed 0.
struct UsChainOptions us_chain_options_default(void);

// Parses a prior from JSON, e.g. `{"family":"ep","q":0.2}` or
// `{"family":"log","tau":{"half_cauchy":1}}`. Omitting `tau` selects the
// family's default hyperprior.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum UsStatus us_prior_from_json(const char *json, struct UsPrior **out);

// # Safety
// `prior` must come from [`us_prior_from_json`] or be NULL.
void us_prior_free(struct UsPrior *prior);

// Log prior density (up to its constant) of `theta` at global scale `tau`.
//
// # Safety
// `prior` and `out` must be valid pointers.
enum UsStatus us_prior_log_density(const struct UsPrior *prior,
                                   double tau,
                                   double theta,
                                   double *out);

// Latent scale `t` with survival `P(T > t | theta) = u`.
//
// # Safety
// `prior` and `out` must be valid pointers.
enum UsStatus us_prior_inverse_cdf(const struct UsPrior *prior,
                                   double tau,
                                   double theta,
                                   double u,
                                   double *out);

// Samples the posterior of a `p x p` precision matrix given the scatter
// matrix `s` (row-major) of `n` centred observations, on the complete graph.
//
// # Safety
// `s` must hold `p * p` values; `prior`, `options` and `out` must be valid.
enum UsStatus us_fit_precision(const struct UsPrior *prior,
                               const double *s,
                               uintptr_t p,
                               double n,
                               const struct UsChainOptions *options,
                               struct UsPrecisionFit **out);

// # Safety
// `fit` must come from [`us_fit_precision`] or be NULL.
void us_precision_fit_free(struct UsPrecisionFit *fit);

// Dimension `p`, or 0 for NULL.
//
// # Safety
// `fit` must be valid or NULL.
uintptr_t us_precision_fit_dim(const struct UsPrecisionFit *fit);

// Number of stored draws, or 0 for NULL.
//
// # Safety
// `fit` must be valid or NULL.
uintptr_t us_precision_fit_num_draws(const struct UsPrecisionFit *fit);

// Fraction of truncated draws that needed the underflow fallback, or NaN
// for NULL.
//
// # Safety
// `fit` must be valid or NULL.
double us_precision_fit_fallback_rate(const struct UsPrecisionFit *fit);

// Copies the posterior mean of the precision matrix (`p * p`, row-major).
//
// # Safety
// `fit` must be valid and `buf` must hold `len` values.
enum UsStatus us_precision_fit_mean_omega(const struct UsPrecisionFit *fit,
                                          double *buf,
                                          uintptr_t len);

// Copies stored draw `k` as a lower triangle in row order (`p (p + 1) / 2`
// values).
//
// # Safety
// `fit` must be valid and `buf` must hold `len` values.
enum UsStatus us_precision_fit_draw(const struct UsPrecisionFit *fit,
                                    uintptr_t k,
                                    double *buf,
                                    uintptr_t len);

// Samples the posterior of `β` in `y = Xβ + ε` under the shrinkage prior.
// `x` is `n x p` row-major and `y` has `n` values.
//
// # Safety
// `x` and `y` must hold `n * p` and `n` values; the other pointers must be
// valid.
enum UsStatus us_fit_regression(const struct UsPrior *prior,
                                const double *x,
                                const double *y,
                                uintptr_t n,
                                uintptr_t p,
                                const struct UsChainOptions *options,
                                struct UsRegressionFit **out);

// # Safety
// `fit` must come from [`us_fit_regression`] or be NULL.
void us_regression_fit_free(struct UsRegressionFit *fit);

// Copies the posterior mean of `β` (`p` values).
//
// # Safety
// `fit` must be valid and `buf` must hold `len` values.
enum UsStatus us_regression_fit_mean_beta(const struct UsRegressionFit *fit,
                                          double *buf,
                                          uintptr_t len);

// Posterior mean of the noise variance, or NaN for NULL.
//
// # Safety
// `fit` must be valid or NULL.
double us_regression_fit_mean_sigma2(const struct UsRegressionFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNISHRINK_H */
