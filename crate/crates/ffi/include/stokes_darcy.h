#ifndef STOKES_DARCY_H
#define STOKES_DARCY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_UTF8 = 2,
  SD_STATUS_OUT_OF_RANGE = 3,
  SD_STATUS_CONFIG = 4,
  SD_STATUS_MESH = 5,
  SD_STATUS_PARAMETER = 6,
  SD_STATUS_SOLVER = 7,
  SD_STATUS_IO = 8,
  // A check of `sd_check` failed; the audit itself ran.
  SD_STATUS_CHECK_FAILED = 9,
  SD_STATUS_PANIC = 10,
} SdStatus;

// A validated run configuration.
typedef struct SdConfig SdConfig;

// The solved levels of one configuration.
typedef struct SdRun SdRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next call.
const char *sd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sd_version(void);

// Parses a TOML configuration held in memory. Relative mesh paths are taken as given.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be a valid pointer.
enum SdStatus sd_config_parse(const char *toml, struct SdConfig **out);

// Reads a TOML configuration file; relative mesh paths resolve against its directory.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum SdStatus sd_config_load(const char *path, struct SdConfig **out);

// Number of refinement levels the configuration describes.
//
// # Safety
// `config` must come from `sd_config_parse`/`sd_config_load`; `out` must be valid.
enum SdStatus sd_config_level_count(const struct SdConfig *config, size_t *out);

// # Safety
// `config` must be null or a handle not yet freed.
void sd_config_free(struct SdConfig *config);

// Solves every level of `config` (levels run concurrently when `parallel` is non-zero).
//
// # Safety
// `config` must be a live handle; `out` must be a valid pointer.
enum SdStatus sd_run(const struct SdConfig *config, int parallel, struct SdRun **out);

// # Safety
// `run` must be null or a handle not yet freed.
void sd_run_free(struct SdRun *run);

// # Safety
// `run` must be a live handle; `out` must be valid.
enum SdStatus sd_run_level_count(const struct SdRun *run, size_t *out);

// Relative errors `(e_u, e_p)` of level `k`; NaN when the configuration has no reference.
//
// # Safety
// `run` must be a live handle; `e_u` and `e_p` must be valid.
enum SdStatus sd_run_errors(const struct SdRun *run, size_t k, double *e_u, double *e_p);

// Total velocity, total pressure, and Φ of level `k` at `(x, y)`, written to `out[0..4]`.
//
// # Safety
// `run` must be a live handle; `out` must point to four writable doubles.
enum SdStatus sd_run_sample(const struct SdRun *run, size_t k, double x, double y, double *out);

// Writes the convergence report CSV of all levels.
//
// # Safety
// `run` must be a live handle; `path` a NUL-terminated string.
enum SdStatus sd_run_write_report(const struct SdRun *run, const char *path);

// Writes the fields of level `k` as a VTK legacy file.
//
// # Safety
// `run` must be a live handle; `path` a NUL-terminated string.
enum SdStatus sd_run_write_vtk(const struct SdRun *run, size_t k, const char *path);

// Same as the `solve` command: runs and writes report, diagnostics, snapshots, and manifest
// into `out_dir`.
//
// # Safety
// `config` must be a live handle; `out_dir` a NUL-terminated string.
enum SdStatus sd_execute(const struct SdConfig *config, const char *out_dir, int parallel);

// Runs the operator audit; returns [`SdStatus::CheckFailed`] naming the failed checks.
//
// # Safety
// `config` must be a live handle.
enum SdStatus sd_check(const struct SdConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOKES_DARCY_H */
