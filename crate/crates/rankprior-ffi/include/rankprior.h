/*
 * C interface to the rankprior library: empirical-Bayes ranking of noisy
 * unit-level estimates by posterior mean.
 *
 * Conventions:
 *   - Every fallible function returns an RpStatus; outputs go through
 *     pointers. RP_STATUS_OK means every output pointer that was non-null
 *     has been filled.
 *   - On failure, rp_last_error_message() returns a human-readable message
 *     for the calling thread; successful calls reset it to "".
 *   - RpPrior handles come from the rp_prior_* constructors and must be
 *     released with rp_prior_free. Strings returned through char** must be
 *     released with rp_string_free. NULL is always safe to free.
 *   - No function stores the pointers you pass in; buffers only need to
 *     outlive the call.
 */

#ifndef RANKPRIOR_H
#define RANKPRIOR_H

/* Generated by cbindgen from the rankprior-ffi crate. Do not edit by hand: edit src/lib.rs, then regenerate with `cargo run --manifest-path tools/header-gen/Cargo.toml -- crates/rankprior-ffi crates/rankprior-ffi/include/rankprior.h` from the repository root (or `cbindgen --crate rankprior-ffi --output include/rankprior.h` if the cbindgen CLI is installed). */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function in this interface.
typedef enum RpStatus {
  // Success; all requested outputs were written.
  RP_STATUS_OK = 0,
  // A required pointer argument was NULL.
  RP_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  RP_STATUS_UTF8 = 2,
  // An argument value was rejected (bad parameter, malformed input).
  RP_STATUS_INVALID_ARGUMENT = 3,
  // Input data could not be parsed or contained no usable rows.
  RP_STATUS_INVALID_DATA = 4,
  // The operation is not defined for this prior family.
  RP_STATUS_UNSUPPORTED = 5,
  // An evaluation was requested outside the function's domain.
  RP_STATUS_DOMAIN = 6,
  // A numerical routine failed to converge or lost accuracy.
  RP_STATUS_NUMERICAL = 7,
  // An estimation procedure failed on the given data.
  RP_STATUS_ESTIMATION = 8,
  // An internal panic was caught at the language boundary.
  RP_STATUS_PANIC = 9,
} RpStatus;

// Tail family selector for [`rp_fit_tail`].
typedef enum RpTailFamily {
  // Centered normal prior; the fitted parameter is the scale `tau`.
  RP_TAIL_FAMILY_NORMAL = 0,
  // Exponential prior; the fitted parameter is the rate `lambda`.
  RP_TAIL_FAMILY_EXPONENTIAL = 1,
  // Pareto prior; the fitted parameter is the tail index `alpha`.
  RP_TAIL_FAMILY_PARETO = 2,
} RpTailFamily;

// Opaque handle to a prior distribution. Create with the `rp_prior_*`
// constructors, release with [`rp_prior_free`].
typedef struct RpPrior RpPrior;

// Options for [`rp_fit_npmle`]. Pass NULL to use the library defaults
// (grid_size 400, max_iterations 5000, loglik_tolerance 1e-10,
// weight_prune_threshold 1e-12).
typedef struct RpNpmleOptions {
  // Number of evenly spaced candidate support points added alongside the
  // observed estimates (0 keeps only the observed values).
  size_t grid_size;
  // Hard cap on EM iterations; must be at least 1.
  size_t max_iterations;
  // Convergence threshold on the change in marginal log-likelihood.
  double loglik_tolerance;
  // Support weights below this are pruned after convergence, in (0, 1).
  double weight_prune_threshold;
} RpNpmleOptions;

// Fit diagnostics filled in by [`rp_fit_npmle`].
typedef struct RpNpmleReport {
  // Marginal log-likelihood of the fitted prior on the input data.
  double log_likelihood;
  // Maximum gradient ratio over the candidate grid; values at most
  // `1 + 1e-6` certify first-order optimality of the fit.
  double max_gradient_ratio;
  // EM iterations actually run.
  size_t iterations;
  // Whether the log-likelihood change dropped below the tolerance before
  // the iteration cap. `false` is a warning, not a failure: the best
  // iterate is still returned.
  bool converged;
} RpNpmleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parse a prior from its JSON encoding, e.g.
// `{"family": "normal", "params": {"tau": 1.0}}` or
// `{"family": "pareto", "params": {"min": 0.5, "shape": 2.0}}`.
//
// On success writes a new handle to `out`; release it with
// [`rp_prior_free`].
//
// # Safety
// `json` must point to a NUL-terminated string and `out` to a writable
// `RpPrior*` slot.
enum RpStatus rp_prior_from_json(const char *json, struct RpPrior **out);

// Construct a centered normal prior with scale `tau > 0`.
//
// # Safety
// `out` must point to a writable `RpPrior*` slot.
enum RpStatus rp_prior_normal(double tau, struct RpPrior **out);

// Construct an exponential prior with rate `lambda > 0`.
//
// # Safety
// `out` must point to a writable `RpPrior*` slot.
enum RpStatus rp_prior_exponential(double rate, struct RpPrior **out);

// Construct the improper flat-left exponential prior with rate
// `lambda > 0` (constant shrinkage `lambda * sigma^2`; its posterior mean
// is exact, not a first-order approximation).
//
// # Safety
// `out` must point to a writable `RpPrior*` slot.
enum RpStatus rp_prior_improper_exponential(double rate, struct RpPrior **out);

// Construct a Pareto prior with minimum `min > 0` and tail index
// `shape > 0`.
//
// # Safety
// `out` must point to a writable `RpPrior*` slot.
enum RpStatus rp_prior_pareto(double min, double shape, struct RpPrior **out);

// Construct a discrete prior from `len` support points and proportional
// weights. Duplicated support points are merged and the weights are
// normalized to sum to 1, so any positive weight vector is accepted.
//
// # Safety
// `support` and `weights` must point to `len` readable doubles each and
// `out` to a writable `RpPrior*` slot.
enum RpStatus rp_prior_discrete(const double *support,
                                const double *weights,
                                size_t len,
                                struct RpPrior **out);

// Serialize a prior back to its JSON encoding. The returned string must be
// released with [`rp_string_free`].
//
// # Safety
// `prior` must be a live handle and `out_json` a writable `char*` slot.
enum RpStatus rp_prior_to_json(const struct RpPrior *prior, char **out_json);

// Family tag of a prior as a static NUL-terminated string: `"normal"`,
// `"exponential"`, `"improper_exponential"`, `"pareto"`, or `"discrete"`.
// Returns NULL if `prior` is NULL. The pointer is static; do not free it.
//
// # Safety
// `prior` must be NULL or a live handle.
const char *rp_prior_family(const struct RpPrior *prior);

// Release a prior handle. NULL is a no-op.
//
// # Safety
// `prior` must be NULL or a handle returned by this library that has not
// already been freed.
void rp_prior_free(struct RpPrior *prior);

// Release a string returned through a `char**` out-parameter. NULL is a
// no-op.
//
// # Safety
// `s` must be NULL or a string returned by this library that has not
// already been freed.
void rp_string_free(char *s);

// Exact posterior mean `E[theta | x, sigma]` of a unit's latent effect
// under `prior`, for an estimate `x` with standard error `sigma >= 0`
// (`sigma = 0` returns `x`).
//
// # Safety
// `prior` must be a live handle and `out` a writable double.
enum RpStatus rp_posterior_mean(const struct RpPrior *prior, double x, double sigma, double *out);

// First-order posterior-mean approximation `x - lambda(x) * sigma^2`,
// where `lambda = -pi'/pi` is the prior's shrinkage rate. Not defined for
// discrete priors.
//
// # Safety
// `prior` must be a live handle and `out` a writable double.
enum RpStatus rp_posterior_mean_approx(const struct RpPrior *prior,
                                       double x,
                                       double sigma,
                                       double *out);

// Rank `n` units by posterior mean, best first, ties broken by ascending
// unit index. Writes the unit indices (a permutation of `0..n`) to
// `out_order` and, when `out_scores` is non-null, the aligned
// non-increasing scores to `out_scores`. Both buffers must hold `n`
// entries. Ranking zero units is rejected as an invalid argument.
//
// # Safety
// `x` and `sigma` must point to `n` readable doubles, `out_order` to `n`
// writable `size_t`, and `out_scores` to NULL or `n` writable doubles.
enum RpStatus rp_rank(const struct RpPrior *prior,
                      const double *x,
                      const double *sigma,
                      size_t n,
                      size_t *out_order,
                      double *out_scores);

// Fit the nonparametric maximum-likelihood prior (a discrete distribution)
// to `n` estimate / standard-error pairs with the EM algorithm. `options`
// may be NULL for the library defaults; `out_report` may be NULL when the
// diagnostics are not wanted. A fit that stops at the iteration cap still
// succeeds, with `converged = false` in the report.
//
// # Safety
// `x` and `sigma` must point to `n` readable doubles, `options` to NULL or
// a readable `RpNpmleOptions`, `out_prior` to a writable `RpPrior*` slot,
// and `out_report` to NULL or a writable `RpNpmleReport`.
enum RpStatus rp_fit_npmle(const double *x,
                           const double *sigma,
                           size_t n,
                           const struct RpNpmleOptions *options,
                           struct RpPrior **out_prior,
                           struct RpNpmleReport *out_report);

// Fit a single tail hyperparameter by truncated maximum likelihood from
// the units whose estimate exceeds `cutoff` strictly (at least two must).
// The fitted parameter is the normal scale `tau`, the exponential rate
// `lambda`, or the Pareto index `alpha` according to `family`; the Pareto
// fit additionally requires `cutoff > 0`.
//
// # Safety
// `x` and `sigma` must point to `n` readable doubles and `out_param` to a
// writable double.
enum RpStatus rp_fit_tail(const double *x,
                          const double *sigma,
                          size_t n,
                          double cutoff,
                          enum RpTailFamily family,
                          double *out_param);

// Solve the equal-score condition at one noise level: the estimate `x`
// whose posterior mean equals `level` when the sampling variance is
// `variance`. This is one point of the prior's equal-score curve; pairs
// `(x, variance)` computed over a variance grid trace the whole curve.
// Fails with [`RpStatus::Domain`] when no estimate reaches the level at
// that noise (e.g. a level above every reachable score).
//
// # Safety
// `prior` must be a live handle and `out_x` a writable double.
enum RpStatus rp_isotaxis_x(const struct RpPrior *prior,
                            double level,
                            double variance,
                            double *out_x);

// Message for the most recent failing call on the calling thread, or ""
// after a success. The pointer stays valid until this thread's next call
// into the library; the library owns it — do not free it.
const char *rp_last_error_message(void);

// Library version as a static NUL-terminated string. Do not free it.
const char *rp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKPRIOR_H */
