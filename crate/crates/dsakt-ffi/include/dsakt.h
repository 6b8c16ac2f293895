#ifndef DSAKT_H
#define DSAKT_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum {
  DSAKT_STATUS_OK = 0,
  DSAKT_STATUS_NULL_ARGUMENT = 1,
  DSAKT_STATUS_INVALID_UTF8 = 2,
  DSAKT_STATUS_IO_ERROR = 3,
  DSAKT_STATUS_BAD_CHECKPOINT = 4,
  DSAKT_STATUS_UNKNOWN_EXERCISE = 5,
  DSAKT_STATUS_INVALID_INPUT = 6,
  DSAKT_STATUS_NUMERIC_ERROR = 7,
} DsaktStatus;

/**
 * Opaque model handle: a loaded checkpoint plus its vocabulary.
 */
typedef struct DsaktModel DsaktModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a checkpoint file. On success writes a handle to `out_model`; the
 * caller owns it and must release it with `dsakt_model_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_model` must be a valid
 * pointer to writable memory.
 */
DsaktStatus dsakt_model_load(const char *path, DsaktModel **out_model);

/**
 * Release a handle obtained from `dsakt_model_load`. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer previously returned by
 * `dsakt_model_load` that has not been freed yet.
 */
void dsakt_model_free(DsaktModel *model);

/**
 * Number of distinct exercises in the model's vocabulary; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint64_t dsakt_model_exercise_count(const DsaktModel *model);

/**
 * Window length the model was trained with; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint64_t dsakt_model_window_len(const DsaktModel *model);

/**
 * Index of an exercise id in the model's vocabulary, or -1 if unknown,
 * or -2 on a bad argument.
 *
 * # Safety
 * `model` must be a live handle; `exercise_id` a NUL-terminated string.
 */
int64_t dsakt_vocab_index(const DsaktModel *model, const char *exercise_id);

/**
 * Probability that the student answers `next_id` correctly, given a
 * history of `len` (exercise id, correctness) pairs ordered oldest first.
 * Histories longer than the model window keep the most recent interactions.
 *
 * # Safety
 * `model` must be a live handle; `exercise_ids` must point to `len`
 * NUL-terminated strings; `corrects` to `len` bytes that are 0 or 1;
 * `next_id` must be NUL-terminated; `out_prob` must be writable.
 */
DsaktStatus dsakt_predict(const DsaktModel *model,
                          const char *const *exercise_ids,
                          const uint8_t *corrects,
                          uintptr_t len,
                          const char *next_id,
                          double *out_prob);

/**
 * Copy the most recent error message on this thread into `buf` (truncated
 * to `cap - 1` bytes, always NUL-terminated). Returns the full message
 * length in bytes, excluding the NUL.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (length query).
 */
uintptr_t dsakt_last_error_message(char *buf, uintptr_t cap);

/**
 * Static library version string; do not free.
 */
const char *dsakt_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSAKT_H */
