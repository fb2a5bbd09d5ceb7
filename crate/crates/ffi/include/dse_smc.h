/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DSE_SMC_H
#define DSE_SMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Search algorithm selector for [`dse_run`].
 */
typedef enum {
  DSE_ALGORITHM_DSE_SMC = 0,
  DSE_ALGORITHM_LOCAL_OPT = 1,
  DSE_ALGORITHM_RANDOM = 2,
} DseAlgorithm;

/**
 * Result codes. `DSE_STATUS_OK` is zero; everything else is an error.
 */
typedef enum {
  DSE_STATUS_OK = 0,
  DSE_STATUS_NULL_POINTER = 1,
  DSE_STATUS_INVALID_ARGUMENT = 2,
  DSE_STATUS_CONFIG = 3,
  DSE_STATUS_UNKNOWN_SUBJECT = 4,
  DSE_STATUS_TARGET = 5,
  DSE_STATUS_BUDGET_EXHAUSTED = 6,
  DSE_STATUS_IO = 7,
  DSE_STATUS_BUFFER_TOO_SMALL = 8,
  DSE_STATUS_PANIC = 9,
} DseStatus;

/**
 * Opaque run result handle.
 */
typedef struct DseRunResult DseRunResult;

/**
 * Opaque target handle.
 */
typedef struct DseTarget DseTarget;

/**
 * Parameters of a built-in subject. `size` is the array length, key count
 * or byte count; `lo`/`hi` bound array values; `key_len` is used by the
 * hash-table subject only.
 */
typedef struct {
  size_t size;
  int64_t lo;
  int64_t hi;
  size_t key_len;
} DseSubjectParams;

/**
 * Tick callback: writes the tick of `genome[0..len]` to `tick_out` and
 * returns 0, or returns nonzero on failure.
 */
typedef int32_t (*DseTickFn)(void *user_data, const uint8_t *genome, size_t len, double *tick_out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *dse_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dse_version(void);

/**
 * Creates a built-in subject (`"insertion-sort"`, `"hash-table"`, ...).
 * `params` may be NULL for size 8, values 0..255 and 4-byte keys.
 */
DseStatus dse_target_builtin(const char *name, const DseSubjectParams *params, DseTarget **out);

/**
 * Wraps a C function as a target. `user_data` is passed back unchanged
 * and must outlive the target.
 */
DseStatus dse_target_callback(size_t genome_len,
                              DseTickFn tick_fn,
                              void *user_data,
                              DseTarget **out);

/**
 * Launches `argv[0..argc]` as a line-protocol child. With `use_penalty`
 * nonzero, evaluations that fail twice record `penalty` instead of
 * failing the run.
 */
DseStatus dse_target_subprocess(const char *const *argv,
                                size_t argc,
                                size_t genome_len,
                                uint64_t timeout_ms,
                                int32_t use_penalty,
                                double penalty,
                                DseTarget **out);

/**
 * Evaluates one genome of exactly `dse_target_genome_len` bytes.
 */
DseStatus dse_target_evaluate(const DseTarget *target,
                              const uint8_t *genome,
                              size_t len,
                              double *tick_out);

/**
 * Genome length in bytes, or 0 for a NULL handle.
 */
size_t dse_target_genome_len(const DseTarget *target);

void dse_target_free(DseTarget *target);

/**
 * Runs one search. `config_json` may be NULL for the default engine
 * configuration; `seed` always overrides the configured seed. `algorithm`
 * is a `DseAlgorithm` value.
 */
DseStatus dse_run(const DseTarget *target,
                  const char *config_json,
                  uint32_t algorithm,
                  uint64_t seed,
                  DseRunResult **out);

/**
 * Best tick found, or NaN for a NULL handle.
 */
double dse_result_best_tick(const DseRunResult *result);

/**
 * Copies the best genome into `buf`. `len_out`, if not NULL, receives the
 * genome length even when `cap` is too small.
 */
DseStatus dse_result_best_genome(const DseRunResult *result,
                                 uint8_t *buf,
                                 size_t cap,
                                 size_t *len_out);

/**
 * Target calls made by the run.
 */
uint64_t dse_result_evaluations(const DseRunResult *result);

/**
 * Index of the last completed epoch (0 if only initialization ran).
 */
uint64_t dse_result_epochs(const DseRunResult *result);

/**
 * Copies the per-epoch stats CSV, NUL-terminated, into `buf`. `len_out`
 * receives the CSV length without the terminator; `cap` must exceed it.
 */
DseStatus dse_result_stats_csv(const DseRunResult *result, char *buf, size_t cap, size_t *len_out);

void dse_result_free(DseRunResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSE_SMC_H */
