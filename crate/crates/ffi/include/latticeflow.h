#ifndef LATTICEFLOW_H
#define LATTICEFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The values 1 to 3 match the command-line exit codes.
 */
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_CHECK_FAILED = 1,
  LF_STATUS_PARSE = 2,
  LF_STATUS_PRECONDITION = 3,
  LF_STATUS_NULL_ARGUMENT = 4,
  LF_STATUS_PANIC = 5,
} LfStatus;

/**
 * Opaque real function handle.
 */
typedef struct LfFunction LfFunction;

/**
 * Opaque semigroup handle.
 */
typedef struct LfSemigroup LfSemigroup;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on this thread.
 */
const char *lf_last_error_message(void);

/**
 * Parses an expression such as `"hat(0,1,1)"` or a JSON function document.
 *
 * # Safety
 * `src` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LfStatus lf_function_parse(const char *src, struct LfFunction **out);

/**
 * # Safety
 * `f` must come from this library and not be used afterwards; null is ignored.
 */
void lf_function_free(struct LfFunction *f);

/**
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_function_eval(const struct LfFunction *f, double x, double *out);

/**
 * Samples `f` on the grid `lo..=hi` with `n` points into `values`, which
 * must hold `n` doubles.
 *
 * # Safety
 * `values` must point to `n` writable doubles.
 */
enum LfStatus lf_function_sample(const struct LfFunction *f,
                                 double lo,
                                 double hi,
                                 size_t n,
                                 double *values);

/**
 * Order-unit norm of `f` with respect to `u` on the grid `lo..=hi`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum LfStatus lf_order_unit_norm(const struct LfFunction *f,
                                 const struct LfFunction *u,
                                 double lo,
                                 double hi,
                                 size_t n,
                                 double *out);

/**
 * Heat kernel constant `C_n` for dimension `n`.
 *
 * # Safety
 * `out` must be valid.
 */
enum LfStatus lf_gamma_constant(uint32_t n, double *out);

/**
 * Builds a semigroup from JSON, e.g. `{"op":"heat"}`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` valid.
 */
enum LfStatus lf_semigroup_parse(const char *spec, struct LfSemigroup **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards; null is ignored.
 */
void lf_semigroup_free(struct LfSemigroup *s);

/**
 * Applies `T(t)` to `f`; the result is a new handle.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum LfStatus lf_semigroup_apply(const struct LfSemigroup *s,
                                 double t,
                                 const struct LfFunction *f,
                                 struct LfFunction **out);

/**
 * Runs a JSON verification job and writes its reports into `out_dir`.
 * Returns `LF_STATUS_OK` for a passing verdict and `LF_STATUS_CHECK_FAILED`
 * for a failing one; both write the reports.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum LfStatus lf_run_job(const char *job_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATTICEFLOW_H */
