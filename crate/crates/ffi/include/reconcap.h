#ifndef RECONCAP_H
#define RECONCAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  RC_STATUS_IO = 3,
  RC_STATUS_CORRUPT_ARTIFACT = 4,
  RC_STATUS_BUFFER_TOO_SMALL = 5,
  RC_STATUS_INTERNAL = 6,
} RcStatus;

/**
 * Loaded checkpoint. Opaque to C.
 */
typedef struct RcModel RcModel;

typedef struct RcScores {
  double bleu4;
  double rouge_l;
  double cider;
} RcScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` bytes; `needed` may be null.
 */
enum RcStatus rc_last_error(char *buf, size_t len, size_t *needed);

/**
 * Loads a checkpoint file into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RcStatus rc_model_load(const char *path, struct RcModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`rc_model_load`] and not be used afterwards.
 */
void rc_model_free(struct RcModel *model);

/**
 * Vocabulary size including reserved tokens; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t rc_model_vocab_size(const struct RcModel *model);

/**
 * Per-frame feature dimension; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t rc_model_feature_dim(const struct RcModel *model);

/**
 * Captions a row-major `frames × dim` feature matrix with beam search and
 * writes the space-joined words as a NUL-terminated string.
 *
 * # Safety
 * `features` must hold `frames * dim` floats; `buf` must be valid for
 * `len` bytes; `needed` may be null.
 */
enum RcStatus rc_model_caption(const struct RcModel *model,
                               const float *features,
                               size_t frames,
                               size_t dim,
                               size_t beam,
                               char *buf,
                               size_t len,
                               size_t *needed);

/**
 * Scores `n` candidate captions against their references.
 *
 * `references` holds the reference strings of every candidate back to back;
 * `ref_counts[i]` tells how many belong to candidate `i`. Text is cleaned
 * the same way as training captions. CIDEr uses document frequencies from
 * the supplied references.
 *
 * # Safety
 * `candidates` and `ref_counts` must hold `n` entries and `references` the
 * sum of `ref_counts`; all strings NUL-terminated; `out` writable.
 */
enum RcStatus rc_score_captions(const char *const *candidates,
                                const char *const *references,
                                const size_t *ref_counts,
                                size_t n,
                                struct RcScores *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECONCAP_H */
