#ifndef CROSSROADS_H
#define CROSSROADS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every `xr_` call.
 */
typedef enum XrStatus {
  XR_STATUS_OK = 0,
  XR_STATUS_NULL_ARGUMENT = 1,
  XR_STATUS_INVALID_UTF8 = 2,
  XR_STATUS_INVALID_CONFIG = 3,
  XR_STATUS_BUNDLE = 4,
  XR_STATUS_PIPELINE = 5,
  XR_STATUS_EVALUATION = 6,
  XR_STATUS_IO = 7,
  XR_STATUS_INVALID_JSON = 8,
  /**
   * The segment has no detected intersection.
   */
  XR_STATUS_NOT_DETECTED = 9,
  XR_STATUS_PANIC = 99,
} XrStatus;

/**
 * Pipeline configuration.
 */
typedef struct XrConfig XrConfig;

/**
 * Results of processing one segment.
 */
typedef struct XrResults XrResults;

/**
 * Entry and exit of a detected intersection.
 */
typedef struct XrBounds {
  size_t entry_frame;
  size_t exit_frame;
  double entry_distance_m;
  double exit_distance_m;
} XrBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *xr_version(void);

/**
 * Message describing the last failed call on this thread, or an empty
 * string. Valid until the next `xr_` call on the same thread.
 */
const char *xr_last_error_message(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum XrStatus xr_config_default(struct XrConfig **out);

/**
 * Configuration parsed from TOML text; missing keys take their defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum XrStatus xr_config_from_toml(const char *toml, struct XrConfig **out);

/**
 * Configuration as TOML text, released with `xr_string_free`.
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum XrStatus xr_config_to_toml(const struct XrConfig *config, char **out);

/**
 * # Safety
 * `config` must be null or a handle from this library not yet freed.
 */
void xr_config_free(struct XrConfig *config);

/**
 * Load the bundle directory at `bundle_dir` and run the full pipeline.
 *
 * # Safety
 * `config` must come from this library, `bundle_dir` must be a
 * NUL-terminated path and `out` writable.
 */
enum XrStatus xr_process_bundle(const struct XrConfig *config,
                                const char *bundle_dir,
                                struct XrResults **out);

/**
 * Parse a results document previously written as JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum XrStatus xr_results_from_json(const char *json, struct XrResults **out);

/**
 * The results document as JSON, byte-identical to the CLI's results.json.
 *
 * # Safety
 * `results` must come from this library; `out` must be writable.
 */
enum XrStatus xr_results_to_json(const struct XrResults *results, char **out);

/**
 * Bounds of the detected intersection; `XR_STATUS_NOT_DETECTED` when the
 * pipeline reported a failure instead.
 *
 * # Safety
 * `results` must come from this library; `out` must be writable.
 */
enum XrStatus xr_results_bounds(const struct XrResults *results, struct XrBounds *out);

/**
 * Head scans of the segment as CSV.
 *
 * # Safety
 * `results` must come from this library; `out` must be writable.
 */
enum XrStatus xr_results_scans_csv(const struct XrResults *results, char **out);

/**
 * # Safety
 * `results` must be null or a handle from this library not yet freed.
 */
void xr_results_free(struct XrResults *results);

/**
 * Evaluate `results_dir/<segment>/results.json` against the ground truth
 * under `truth_dir`. `group_by` is one of `none`, `signage`, `maneuver`,
 * `table`, or null for `table`. Either out-parameter may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated; non-null outs must be writable.
 */
enum XrStatus xr_evaluate_dirs(const struct XrConfig *config,
                               const char *results_dir,
                               const char *truth_dir,
                               const char *group_by,
                               char **out_json,
                               char **out_csv);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void xr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSROADS_H */
