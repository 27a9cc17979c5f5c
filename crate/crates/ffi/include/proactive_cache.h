#ifndef PROACTIVE_CACHE_H
#define PROACTIVE_CACHE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_STRING = 2,
  PC_STATUS_CONFIG = 3,
  PC_STATUS_PARSE = 4,
  PC_STATUS_MODEL = 5,
  PC_STATUS_NUMERICAL = 6,
  PC_STATUS_IO = 7,
  PC_STATUS_OUT_OF_RANGE = 8,
  PC_STATUS_PANIC = 9,
} PcStatus;

/**
 * Experiment configuration handle.
 */
typedef struct PcConfig PcConfig;

/**
 * Experiment point: environment, channel statistics and both bounds.
 */
typedef struct PcContext PcContext;

/**
 * Average cost of one scheme over the evaluation trajectories.
 */
typedef struct {
  double mean;
  double stderr;
  uintptr_t n_traj;
  uintptr_t n_slots;
} PcEvalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t pc_last_error(char *buf, uintptr_t len);

/**
 * New configuration holding the library defaults.
 */
PcConfig *pc_config_new(void);

/**
 * Reads a `key=value` configuration file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
PcStatus pc_config_load(const char *path, PcConfig **out);

/**
 * Sets one dotted key, e.g. `cache.capacity` to `30`.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be NUL-terminated.
 */
PcStatus pc_config_set(PcConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be null or a handle from this library not yet freed.
 */
void pc_config_free(PcConfig *cfg);

/**
 * Builds an experiment point. Estimates the channel statistics, so it may
 * take a moment with the default sample count.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid pointer.
 */
PcStatus pc_context_new(const PcConfig *cfg, PcContext **out);

/**
 * # Safety
 * `ctx` must be null or a handle from this library not yet freed.
 */
void pc_context_free(PcContext *ctx);

/**
 * Estimated mean transmission cost per content, in mW.
 *
 * # Safety
 * `ctx` must be a live context handle and `out` a valid pointer.
 */
PcStatus pc_context_mean_cost(const PcContext *ctx, double *out);

/**
 * Unlimited-cache bound threshold for a content with `lifetime` slots left.
 *
 * # Safety
 * `ctx` must be a live context handle and `out` a valid pointer.
 */
PcStatus pc_context_lbuc_threshold(const PcContext *ctx, uintptr_t lifetime, double *out);

/**
 * Non-causal bound threshold when the next access is `gap` slots away.
 * Gap zero yields infinity.
 *
 * # Safety
 * `ctx` must be a live context handle and `out` a valid pointer.
 */
PcStatus pc_context_lbnck_threshold(const PcContext *ctx, uintptr_t gap, double *out);

/**
 * Evaluates a scheme by name (`reactive`, `random`, `lb_uc`, `lb_nck`,
 * `liso_fdm`, `liso_lrm`, `lfa_fdm`, `lfa_lrm`). Trained schemes are trained
 * first with the context's budget.
 *
 * # Safety
 * `ctx` must be a live context handle, `scheme` NUL-terminated and `out` valid.
 */
PcStatus pc_context_eval(const PcContext *ctx, const char *scheme, PcEvalResult *out);

/**
 * Unlimited-cache thresholds for a cost uniform on `[lo, hi]` and access
 * probability `p_a`, written to `out[0..len]` for lifetimes `1..=len`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
PcStatus pc_lbuc_thresholds_uniform(double lo, double hi, double p_a, double *out, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROACTIVE_CACHE_H */
