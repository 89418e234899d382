#ifndef CQBEM_H
#define CQBEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum CqbemStatus {
  CQBEM_STATUS_OK = 0,
  CQBEM_STATUS_NULL_ARGUMENT = 1,
  CQBEM_STATUS_INVALID_UTF8 = 2,
  CQBEM_STATUS_CONFIG = 3,
  CQBEM_STATUS_MESH = 4,
  CQBEM_STATUS_SOLVE = 5,
  CQBEM_STATUS_PRECONDITION = 6,
  CQBEM_STATUS_IO = 7,
  CQBEM_STATUS_BUFFER_TOO_SMALL = 8,
  CQBEM_STATUS_OUT_OF_RANGE = 9,
  CQBEM_STATUS_PANIC = 10,
  CQBEM_STATUS_OTHER = 11,
} CqbemStatus;

/**
 * Parsed run configuration.
 */
typedef struct CqbemConfig CqbemConfig;

/**
 * Result of a completed run: time grid and field samples.
 */
typedef struct CqbemRun CqbemRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next cqbem call on the same thread.
 */
const char *cqbem_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cqbem_version(void);

/**
 * Parses configuration text. Relative paths resolve against `base_dir`
 * (the current directory when null).
 *
 * # Safety
 * `text` and `base_dir` must be null or NUL-terminated; `out` must be a
 * valid pointer.
 */
enum CqbemStatus cqbem_config_parse(const char *text,
                                    const char *base_dir,
                                    struct CqbemConfig **out);

/**
 * Reads and parses a configuration file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum CqbemStatus cqbem_config_from_file(const char *path, struct CqbemConfig **out);

/**
 * Overrides the output directory.
 *
 * # Safety
 * `config` must come from this library; `dir` must be NUL-terminated.
 */
enum CqbemStatus cqbem_config_set_output_dir(struct CqbemConfig *config, const char *dir);

/**
 * # Safety
 * `config` must be null or come from this library, and is invalid afterwards.
 */
void cqbem_config_free(struct CqbemConfig *config);

/**
 * Runs the scattering problem and writes its CSV files and manifest.
 *
 * # Safety
 * `config` must come from this library; `out` must be a valid pointer.
 */
enum CqbemStatus cqbem_run(const struct CqbemConfig *config, int quiet, struct CqbemRun **out);

/**
 * Number of time samples t_0, ..., t_N (N + 1), or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
uintptr_t cqbem_run_num_times(const struct CqbemRun *run);

/**
 * Number of observation points, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
uintptr_t cqbem_run_num_points(const struct CqbemRun *run);

/**
 * Copies the time grid into `out` (capacity `len`).
 *
 * # Safety
 * `run` must come from this library; `out` must hold `len` doubles.
 */
enum CqbemStatus cqbem_run_times(const struct CqbemRun *run, double *out, uintptr_t len);

/**
 * Copies the field history at observation point `point` into `out`
 * (capacity `len`). Points inside the obstacle yield NaN.
 *
 * # Safety
 * `run` must come from this library; `out` must hold `len` doubles.
 */
enum CqbemStatus cqbem_run_field(const struct CqbemRun *run,
                                 uintptr_t point,
                                 double *out,
                                 uintptr_t len);

/**
 * # Safety
 * `run` must be null or come from this library, and is invalid afterwards.
 */
void cqbem_run_free(struct CqbemRun *run);

/**
 * Sphere oracle at the first observation point on the configuration's
 * reference grid (`reference.steps` + 1 samples). `written` receives the
 * sample count, also when the buffer is too small.
 *
 * # Safety
 * `config` must come from this library; `out` must hold `len` doubles;
 * `written` must be null or valid.
 */
enum CqbemStatus cqbem_reference_field(const struct CqbemConfig *config,
                                       double *out,
                                       uintptr_t len,
                                       uintptr_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CQBEM_H */
