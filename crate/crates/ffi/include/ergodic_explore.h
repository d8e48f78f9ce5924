#ifndef ERGODIC_EXPLORE_H
#define ERGODIC_EXPLORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EeStatus {
  EE_STATUS_OK = 0,
  EE_STATUS_INVALID_CONFIG = 1,
  EE_STATUS_RUNTIME = 2,
  EE_STATUS_IO = 3,
  EE_STATUS_NULL_ARGUMENT = 4,
  EE_STATUS_OUT_OF_RANGE = 5,
  EE_STATUS_PANIC = 6,
} EeStatus;

/**
 * A validated run configuration.
 */
typedef struct EeConfig EeConfig;

/**
 * The result of a finished run.
 */
typedef struct EeTrace EeTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ee_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ee_version(void);

/**
 * The bundled three-hole configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EeStatus ee_config_default(struct EeConfig **out);

/**
 * Parses config text in the config-file format.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum EeStatus ee_config_parse(const char *text, struct EeConfig **out);

/**
 * Reads a config file.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
enum EeStatus ee_config_load(const char *path, struct EeConfig **out);

/**
 * Sets one key (full dotted name or unique suffix) to a value in config
 * syntax, e.g. `("v_max", "5")`. The config is left unchanged on failure.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` NUL-terminated.
 */
enum EeStatus ee_config_set(struct EeConfig *cfg, const char *key, const char *value);

/**
 * Config in file format; free the string with [`ee_string_free`].
 *
 * # Safety
 * `cfg` must come from this library; `out` valid.
 */
enum EeStatus ee_config_to_string(const struct EeConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library or be null.
 */
void ee_config_free(struct EeConfig *cfg);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void ee_string_free(char *s);

/**
 * Runs the simulation to completion.
 *
 * # Safety
 * `cfg` must come from this library; `out` valid.
 */
enum EeStatus ee_run(const struct EeConfig *cfg, struct EeTrace **out);

/**
 * # Safety
 * `trace` must come from this library or be null.
 */
void ee_trace_free(struct EeTrace *trace);

/**
 * Number of recorded `V` samples; 0 for a null handle.
 *
 * # Safety
 * `trace` must come from this library or be null.
 */
size_t ee_trace_metric_count(const struct EeTrace *trace);

/**
 * Sample `index` of `V`: its step, value and 1-based target hole.
 *
 * # Safety
 * `trace` must come from this library; outputs valid or null.
 */
enum EeStatus ee_trace_metric(const struct EeTrace *trace,
                              size_t index,
                              uint64_t *k,
                              double *v,
                              uint32_t *target_hole);

/**
 * Number of robot positions (one per step, starting at step 0).
 *
 * # Safety
 * `trace` must come from this library or be null.
 */
size_t ee_trace_position_count(const struct EeTrace *trace);

/**
 * # Safety
 * `trace` must come from this library; `x` and `y` valid.
 */
enum EeStatus ee_trace_position(const struct EeTrace *trace, size_t index, double *x, double *y);

/**
 * Copies up to `capacity` positions as interleaved `x, y` pairs into
 * `xy` (length `2 * capacity`) and returns how many were copied.
 *
 * # Safety
 * `trace` must come from this library; `xy` must hold `2 * capacity` doubles.
 */
size_t ee_trace_positions(const struct EeTrace *trace, double *xy, size_t capacity);

/**
 * `V` at the last step.
 *
 * # Safety
 * `trace` must come from this library; `v` valid.
 */
enum EeStatus ee_trace_final_v(const struct EeTrace *trace, double *v);

/**
 * Completed tour cycles.
 *
 * # Safety
 * `trace` must come from this library or be null.
 */
uint64_t ee_trace_cycles(const struct EeTrace *trace);

/**
 * Writes the same artifacts as the CLI `run` command into `dir`.
 *
 * # Safety
 * `trace` must come from this library; `dir` NUL-terminated.
 */
enum EeStatus ee_trace_write(const struct EeTrace *trace, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERGODIC_EXPLORE_H */
