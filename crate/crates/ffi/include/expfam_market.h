#ifndef EXPFAM_MARKET_H
#define EXPFAM_MARKET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum ExpfamStatus {
  EXPFAM_STATUS_OK = 0,
  EXPFAM_STATUS_DOMAIN = 1,
  EXPFAM_STATUS_CONVERGENCE = 2,
  EXPFAM_STATUS_UNSUPPORTED = 3,
  EXPFAM_STATUS_CONFIG = 4,
  EXPFAM_STATUS_CORRUPT_LOG = 5,
  EXPFAM_STATUS_IO = 6,
  EXPFAM_STATUS_NULL_POINTER = 7,
  EXPFAM_STATUS_INVALID_UTF8 = 8,
  /**
   * The output buffer is too short; the needed length is in the message.
   */
  EXPFAM_STATUS_BUFFER_TOO_SMALL = 9,
  EXPFAM_STATUS_PANIC = 10,
} ExpfamStatus;

/**
 * Opaque exponential family.
 */
typedef struct ExpfamFamily ExpfamFamily;

/**
 * Opaque market maker.
 */
typedef struct ExpfamMarket ExpfamMarket;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *expfam_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void expfam_string_free(char *s);

/**
 * Parses a family id such as `categorical:3` or `weibull-moment:2`.
 *
 * # Safety
 * `id` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ExpfamStatus expfam_family_new(const char *id, struct ExpfamFamily **out);

/**
 * # Safety
 * `f` must be null or a live handle from [`expfam_family_new`].
 */
void expfam_family_free(struct ExpfamFamily *f);

/**
 * Length of parameter vectors for the family, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t expfam_family_dim(const struct ExpfamFamily *f);

/**
 * Log-partition `T(theta)`.
 *
 * # Safety
 * `theta` must point to `len` doubles and `out` must be valid.
 */
enum ExpfamStatus expfam_log_partition(const struct ExpfamFamily *f,
                                       const double *theta,
                                       size_t len,
                                       double *out);

/**
 * Mean parameters `grad T(theta)`, written to `out`.
 *
 * # Safety
 * `theta` must point to `len` doubles and `out` to `out_len` doubles.
 */
enum ExpfamStatus expfam_mean_from_natural(const struct ExpfamFamily *f,
                                           const double *theta,
                                           size_t len,
                                           double *out,
                                           size_t out_len);

/**
 * Natural parameters for mean `mu`, written to `out`.
 *
 * # Safety
 * `mu` must point to `len` doubles and `out` to `out_len` doubles.
 */
enum ExpfamStatus expfam_natural_from_mean(const struct ExpfamFamily *f,
                                           const double *mu,
                                           size_t len,
                                           double *out,
                                           size_t out_len);

/**
 * Bregman divergence `D_T(a, b)`.
 *
 * # Safety
 * `a` and `b` must each point to `len` doubles and `out` must be valid.
 */
enum ExpfamStatus expfam_bregman_divergence(const struct ExpfamFamily *f,
                                            const double *a,
                                            const double *b,
                                            size_t len,
                                            double *out);

/**
 * Log score of mean report `mu` at an outcome given as values (a 1-based
 * category, one real, or three coordinates). Zero-density outcomes score
 * negative infinity.
 *
 * # Safety
 * `mu` must point to `len` doubles, `outcome` to `outcome_len` doubles,
 * and `out` must be valid.
 */
enum ExpfamStatus expfam_log_score(const struct ExpfamFamily *f,
                                   const double *mu,
                                   size_t len,
                                   const double *outcome,
                                   size_t outcome_len,
                                   double *out);

/**
 * Opens a market with shares `theta` and inverse liquidity `lambda`.
 *
 * # Safety
 * `f` must be a live handle, `theta` must point to `len` doubles and `out`
 * must be valid.
 */
enum ExpfamStatus expfam_market_new(const struct ExpfamFamily *f,
                                    const double *theta,
                                    size_t len,
                                    double inv_liquidity,
                                    struct ExpfamMarket **out);

/**
 * Opens a market from a JSON market state.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` must be valid.
 */
enum ExpfamStatus expfam_market_from_json(const char *json, struct ExpfamMarket **out);

/**
 * # Safety
 * `m` must be null or a live market handle.
 */
void expfam_market_free(struct ExpfamMarket *m);

/**
 * Current prices, written to `out`.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `out_len` doubles.
 */
enum ExpfamStatus expfam_market_prices(struct ExpfamMarket *m, double *out, size_t out_len);

/**
 * Cost of buying `delta`, without executing.
 *
 * # Safety
 * `m` must be a live handle, `delta` must point to `len` doubles and `out`
 * must be valid.
 */
enum ExpfamStatus expfam_market_quote(struct ExpfamMarket *m,
                                      const double *delta,
                                      size_t len,
                                      double *out);

/**
 * Buys `delta` for `trader_id` and writes the cost to `out_cost`. On
 * failure the market is unchanged.
 *
 * # Safety
 * `m` must be a live handle, `delta` must point to `len` doubles,
 * `trader_id` must be a NUL-terminated string and `out_cost` may be null.
 */
enum ExpfamStatus expfam_market_execute(struct ExpfamMarket *m,
                                        const double *delta,
                                        size_t len,
                                        const char *trader_id,
                                        double *out_cost);

/**
 * The market state as JSON. Free the result with [`expfam_string_free`].
 *
 * # Safety
 * `m` must be a live handle and `out` must be valid.
 */
enum ExpfamStatus expfam_market_state_json(struct ExpfamMarket *m, char **out);

/**
 * Runs a simulation from a JSON config and returns the JSON report. A
 * report whose `valid` field is false still comes back with status `Ok`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` must be valid.
 */
enum ExpfamStatus expfam_simulate_json(const char *config_json, char **out);

/**
 * Solves an equilibrium problem given as JSON and returns the JSON report.
 *
 * # Safety
 * `problem_json` must be a NUL-terminated string and `out` must be valid.
 */
enum ExpfamStatus expfam_equilibrium_json(const char *problem_json,
                                          size_t max_rounds,
                                          double tol,
                                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXPFAM_MARKET_H */
