#ifndef DYNTRACK_H
#define DYNTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DtStatus {
  DT_STATUS_OK = 0,
  DT_STATUS_NULL_POINTER = 1,
  DT_STATUS_INVALID_UTF8 = 2,
  DT_STATUS_INVALID_CONFIG = 3,
  DT_STATUS_INVALID_ARGUMENT = 4,
  DT_STATUS_OUT_OF_RANGE = 5,
  DT_STATUS_IO = 6,
  DT_STATUS_SIMULATION = 7,
  DT_STATUS_PANIC = 8,
} DtStatus;

/**
 * Scenario configuration.
 */
typedef struct DtConfig DtConfig;

/**
 * Dynamic occupancy grid.
 */
typedef struct DtGrid DtGrid;

/**
 * Recorded episode.
 */
typedef struct DtTrace DtTrace;

/**
 * Metrics of one episode step.
 */
typedef struct DtMetrics {
  /**
   * End-of-step time, seconds.
   */
  double t;
  /**
   * Mean cell entropy, bits.
   */
  double entropy;
  double mse;
  size_t n_detections_step;
  double mean_detections;
} DtMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *dt_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void dt_string_free(char *s);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DtStatus dt_config_default(struct DtConfig **out);

/**
 * Parses and validates a TOML configuration. Missing keys take defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` a valid pointer.
 */
enum DtStatus dt_config_from_toml(const char *toml, struct DtConfig **out);

/**
 * Sets one dotted key, e.g. `("wind.mean_speed", "9")`. The value is a TOML
 * literal; bare words are strings. The config is unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum DtStatus dt_config_set(struct DtConfig *cfg, const char *key, const char *value);

/**
 * Canonical TOML form; free with [`dt_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_config_to_toml(const struct DtConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a live handle, not used afterwards.
 */
void dt_config_free(struct DtConfig *cfg);

/**
 * Runs one seeded episode.
 *
 * # Safety
 * `cfg` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_run_episode(const struct DtConfig *cfg, uint64_t seed, struct DtTrace **out);

/**
 * Loads and validates a trace file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum DtStatus dt_trace_load(const char *path, struct DtTrace **out);

/**
 * Writes the trace file format.
 *
 * # Safety
 * `trace` must be a live handle; `path` a NUL-terminated string.
 */
enum DtStatus dt_trace_save(const struct DtTrace *trace, const char *path);

/**
 * Number of recorded steps.
 *
 * # Safety
 * `trace` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_trace_len(const struct DtTrace *trace, size_t *out);

/**
 * Metrics after step `step` (0-based).
 *
 * # Safety
 * `trace` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_trace_metrics(const struct DtTrace *trace, size_t step, struct DtMetrics *out);

/**
 * Hex sha256 of the trace; free with [`dt_string_free`].
 *
 * # Safety
 * `trace` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_trace_checksum(const struct DtTrace *trace, char **out);

/**
 * # Safety
 * `trace` must be null or a live handle, not used afterwards.
 */
void dt_trace_free(struct DtTrace *trace);

/**
 * Grid from `nx·ny` row-major probabilities (clamped to `[p_low, p_high]`).
 *
 * # Safety
 * `probs` must point to `nx·ny` doubles; `out` a valid pointer.
 */
enum DtStatus dt_grid_from_probabilities(size_t nx,
                                         size_t ny,
                                         double cell_dx,
                                         double cell_dy,
                                         const double *probs,
                                         double p_low,
                                         double p_high,
                                         struct DtGrid **out);

/**
 * Applies one drift-prediction step.
 *
 * # Safety
 * `grid` must be a live handle.
 */
enum DtStatus dt_grid_predict(struct DtGrid *grid,
                              double wind_speed,
                              double wind_dir,
                              double dt,
                              double gamma,
                              double alpha,
                              double beta);

/**
 * Copies the cell probabilities (row-major) into `out[0..len]`; `len` must
 * equal `nx·ny`.
 *
 * # Safety
 * `grid` must be a live handle; `out` must point to `len` doubles.
 */
enum DtStatus dt_grid_probabilities(const struct DtGrid *grid, double *out, size_t len);

/**
 * Mean cell entropy in bits.
 *
 * # Safety
 * `grid` must be a live handle; `out` a valid pointer.
 */
enum DtStatus dt_grid_mean_entropy(const struct DtGrid *grid, double *out);

/**
 * # Safety
 * `grid` must be null or a live handle, not used afterwards.
 */
void dt_grid_free(struct DtGrid *grid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNTRACK_H */
