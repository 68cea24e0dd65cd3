#ifndef OPALG_H
#define OPALG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum OpalgStatus {
  OPALG_STATUS_OK = 0,
  /**
   * Malformed input or a violated precondition.
   */
  OPALG_STATUS_VALIDATION = 1,
  /**
   * The computation ran but a requested property does not hold.
   */
  OPALG_STATUS_CHECK_FAILED = 2,
  /**
   * The numerics broke down.
   */
  OPALG_STATUS_NUMERICAL = 3,
  OPALG_STATUS_NULL_POINTER = 4,
  OPALG_STATUS_INVALID_UTF8 = 5,
  /**
   * The output buffer is too small; the required length was written.
   */
  OPALG_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  OPALG_STATUS_PANIC = 7,
} OpalgStatus;

/**
 * Pricing method for [`opalg_jump_price`].
 */
typedef enum OpalgJumpMethod {
  OPALG_JUMP_METHOD_SERIES = 0,
  OPALG_JUMP_METHOD_EXPM = 1,
} OpalgJumpMethod;

/**
 * A lattice jump model.
 */
typedef struct OpalgJumpModel OpalgJumpModel;

/**
 * A validated market model with its pricing state.
 */
typedef struct OpalgPricingSystem OpalgPricingSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *opalg_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `capacity`). Returns the full message length in bytes,
 * excluding the terminator; 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t opalg_last_error_message(char *buf, size_t capacity);

/**
 * Builds a pricing system from model JSON and optional state JSON (null
 * selects the maximally mixed state).
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum OpalgStatus opalg_pricing_system_new(const char *model_json,
                                          const char *state_json,
                                          struct OpalgPricingSystem **out);

/**
 * Releases a pricing system; null is ignored.
 *
 * # Safety
 * `sys` must come from [`opalg_pricing_system_new`] and not be used afterwards.
 */
void opalg_pricing_system_free(struct OpalgPricingSystem *sys);

/**
 * Matrix dimension and number of filtration steps.
 *
 * # Safety
 * `sys` must be a live handle; outputs must be writable.
 */
enum OpalgStatus opalg_pricing_system_shape(const struct OpalgPricingSystem *sys,
                                            size_t *dim,
                                            size_t *horizon);

/**
 * E_t(X) at filtration time `time`.
 *
 * # Safety
 * `sys` must be a live handle, `x_json` NUL-terminated, `out` valid for
 * `capacity` doubles and `written` writable.
 */
enum OpalgStatus opalg_conditional_expectation(const struct OpalgPricingSystem *sys,
                                               double time,
                                               const char *x_json,
                                               double *out,
                                               size_t capacity,
                                               size_t *written);

/**
 * Π_t(X) at filtration time `time`.
 *
 * # Safety
 * As for [`opalg_conditional_expectation`].
 */
enum OpalgStatus opalg_price(const struct OpalgPricingSystem *sys,
                             double time,
                             const char *claim_json,
                             double *out,
                             size_t capacity,
                             size_t *written);

/**
 * Scalar time-zero price of a claim.
 *
 * # Safety
 * `sys` must be a live handle, `claim_json` NUL-terminated, `value` writable.
 */
enum OpalgStatus opalg_price0(const struct OpalgPricingSystem *sys,
                              const char *claim_json,
                              double *value);

/**
 * Runs the model-level property checks. A nonpositive `tol` keeps the
 * built-in tolerances. Counts are written even when checks fail, in which
 * case the status is `CheckFailed`.
 *
 * # Safety
 * `sys` must be a live handle; outputs must be writable.
 */
enum OpalgStatus opalg_check(const struct OpalgPricingSystem *sys,
                             uint64_t seed,
                             double tol,
                             size_t *passed,
                             size_t *failed);

/**
 * Searches for a state ρ ⪰ δI with Tr(ρG) ≤ 0 on every gain. On success ρ
 * is written to `out`; `CheckFailed` means no such state was found. A
 * nonpositive `feas_tol` selects the default.
 *
 * # Safety
 * `gains_json` must be NUL-terminated, `out` valid for `capacity` doubles
 * and `written` writable.
 */
enum OpalgStatus opalg_pricing_state(const char *gains_json,
                                     double delta,
                                     double feas_tol,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

/**
 * Parses a jump model from JSON.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum OpalgStatus opalg_jump_model_new(const char *json, struct OpalgJumpModel **out);

/**
 * Releases a jump model; null is ignored.
 *
 * # Safety
 * `model` must come from [`opalg_jump_model_new`] and not be used afterwards.
 */
void opalg_jump_model_free(struct OpalgJumpModel *model);

/**
 * Discounted price of a bounded payoff (JSON, e.g. `{"kind":"digital","strike":1}`)
 * after time `tau` from spot `s`, with a bound on the truncation error.
 *
 * # Safety
 * `model` must be a live handle, `payoff_json` NUL-terminated, outputs writable.
 */
enum OpalgStatus opalg_jump_price(const struct OpalgJumpModel *model,
                                  const char *payoff_json,
                                  double tau,
                                  double s,
                                  enum OpalgJumpMethod method,
                                  double *value,
                                  double *error_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPALG_H */
