#ifndef PPT_FFI_H
#define PPT_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PptStatus {
  PPT_STATUS_OK = 0,
  PPT_STATUS_NULL_POINTER = 1,
  PPT_STATUS_INVALID_INPUT = 2,
  PPT_STATUS_NOT_PPT = 3,
  PPT_STATUS_NOT_FOUND = 4,
  PPT_STATUS_IO = 5,
  PPT_STATUS_INTERNAL = 6,
} PptStatus;

/**
 * Opaque PPT state.
 */
typedef struct PptStateHandle PptStateHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * Valid until the next library call on the same thread.
 */
const char *ppt_last_error(void);

/**
 * Parses and certifies a state from the JSON state format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PptStatus ppt_state_from_json(const char *json, struct PptStateHandle **out);

/**
 * Loads and certifies a state file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PptStatus ppt_state_load(const char *path, struct PptStateHandle **out);

/**
 * Rank search for an `n_a × n_b` state with ranks `(m, n)`. Returns
 * `NotFound` and leaves `*out` null when no restart reaches the target.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PptStatus ppt_search(size_t n_a,
                          size_t n_b,
                          size_t m,
                          size_t n,
                          uint64_t seed,
                          size_t restarts,
                          struct PptStateHandle **out);

/**
 * Local dimensions of the state.
 *
 * # Safety
 * `state` must be a live handle; `n_a` and `n_b` valid pointers.
 */
enum PptStatus ppt_state_dims(const struct PptStateHandle *state, size_t *n_a, size_t *n_b);

/**
 * Ranks of `ρ` and `ρ^P`.
 *
 * # Safety
 * `state` must be a live handle; `m` and `n` valid pointers.
 */
enum PptStatus ppt_state_ranks(const struct PptStateHandle *state, size_t *m, size_t *n);

/**
 * Copies the density matrix row-major as interleaved `(re, im)` pairs.
 * `len` is the capacity of `buf` in doubles and must be at least `2N²`.
 *
 * # Safety
 * `state` must be a live handle and `buf` valid for `len` doubles.
 */
enum PptStatus ppt_state_matrix(const struct PptStateHandle *state, double *buf, size_t len);

/**
 * Face dimension of the state in the PPT cone.
 *
 * # Safety
 * `state` must be a live handle and `dim_f` a valid pointer.
 */
enum PptStatus ppt_face_dimension(const struct PptStateHandle *state, size_t *dim_f);

/**
 * Serializes the state in the JSON state format.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum PptStatus ppt_state_to_json(const struct PptStateHandle *state, char **out);

/**
 * Full classification as a JSON object.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum PptStatus ppt_classify(const struct PptStateHandle *state, uint64_t seed, char **out);

/**
 * Releases a state handle. Null is ignored.
 *
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void ppt_state_free(struct PptStateHandle *state);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void ppt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PPT_FFI_H */
