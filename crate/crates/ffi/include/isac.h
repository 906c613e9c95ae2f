#ifndef ISAC_H
#define ISAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum IsacStatus {
  ISAC_STATUS_OK = 0,
  ISAC_STATUS_NULL_POINTER = 1,
  ISAC_STATUS_INVALID_UTF8 = 2,
  ISAC_STATUS_CONFIG = 3,
  ISAC_STATUS_DIMENSION = 4,
  ISAC_STATUS_CONTRACT = 5,
  ISAC_STATUS_NUMERICAL = 6,
  ISAC_STATUS_UNKNOWN_VARIANT = 7,
  ISAC_STATUS_IO = 8,
  ISAC_STATUS_PARSE = 9,
  ISAC_STATUS_ZERO_DESIRED_PATTERN = 10,
  /**
   * The output buffer is too short; the required length was written.
   */
  ISAC_STATUS_BUFFER_TOO_SMALL = 11,
  /**
   * A Rust panic was caught at the boundary.
   */
  ISAC_STATUS_INTERNAL = 12,
} IsacStatus;

/**
 * Opaque system configuration.
 */
typedef struct IsacConfig IsacConfig;

/**
 * Opaque result of one solve.
 */
typedef struct IsacReport IsacReport;

/**
 * Scalar summary of a solve, evaluated at the hybrid precoder.
 */
typedef struct IsacMetrics {
  double secrecy_rate;
  double secrecy_gap;
  double beampattern_mse;
  double final_violation;
  double delta;
  uint64_t iterations_inner;
  uint64_t iterations_outer;
  bool converged;
} IsacMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *isac_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *isac_version(void);

/**
 * New configuration with the default scenario.
 */
struct IsacConfig *isac_config_default(void);

/**
 * Parses a flat key-value config document on top of the defaults.
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is a writable pointer.
 */
enum IsacStatus isac_config_parse(const char *text, struct IsacConfig **out);

/**
 * Loads a config file on top of the defaults.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is a writable pointer.
 */
enum IsacStatus isac_config_load(const char *path, struct IsacConfig **out);

/**
 * Sets one scalar field by name and revalidates. On failure the
 * configuration is left unchanged.
 *
 * # Safety
 * `cfg` comes from this library; `name` is a NUL-terminated string.
 */
enum IsacStatus isac_config_set(struct IsacConfig *cfg, const char *name, double value);

/**
 * Reads one scalar field by name.
 *
 * # Safety
 * `cfg` comes from this library; `name` is a NUL-terminated string;
 * `out` is writable.
 */
enum IsacStatus isac_config_get(const struct IsacConfig *cfg, const char *name, double *out);

/**
 * # Safety
 * `cfg` is null or comes from this library and is not used afterwards.
 */
void isac_config_free(struct IsacConfig *cfg);

/**
 * Draws the fading realization for `seed`, solves `variant` on it and
 * stores the result in `*out`.
 *
 * # Safety
 * `cfg` comes from this library; `variant` is a NUL-terminated string;
 * `out` is writable.
 */
enum IsacStatus isac_solve(const struct IsacConfig *cfg,
                           const char *variant,
                           uint64_t seed,
                           struct IsacReport **out);

/**
 * # Safety
 * `report` comes from this library; `out` is writable.
 */
enum IsacStatus isac_report_metrics(const struct IsacReport *report, struct IsacMetrics *out);

/**
 * Copies the beampattern of the hybrid precoder into three caller arrays
 * of length `capacity`. `*len` receives the number of grid angles; when it
 * exceeds `capacity` nothing is copied and `BUFFER_TOO_SMALL` is returned.
 * Any of the three arrays may be null to skip it.
 *
 * # Safety
 * Non-null arrays have room for `capacity` doubles; `len` is writable.
 */
enum IsacStatus isac_report_beampattern(const struct IsacReport *report,
                                        double *theta_deg,
                                        double *p_b,
                                        double *delta_p_d,
                                        size_t capacity,
                                        size_t *len);

/**
 * Writes the per-iteration convergence trace as CSV.
 *
 * # Safety
 * `report` comes from this library; `path` is a NUL-terminated string.
 */
enum IsacStatus isac_report_write_trace(const struct IsacReport *report, const char *path);

/**
 * # Safety
 * `report` is null or comes from this library and is not used afterwards.
 */
void isac_report_free(struct IsacReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAC_H */
