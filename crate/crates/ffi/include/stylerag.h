#ifndef STYLERAG_H
#define STYLERAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  SR_STATUS_DIMENSION_MISMATCH = 3,
  SR_STATUS_NON_FINITE_INPUT = 4,
  SR_STATUS_IO = 5,
  SR_STATUS_CORRUPT_FILE = 6,
  SR_STATUS_UNSUPPORTED_VERSION = 7,
  SR_STATUS_UNKNOWN_CLIP_ID = 8,
  SR_STATUS_DUPLICATE_CLIP_ID = 9,
  SR_STATUS_EMPTY_DATABASE = 10,
  SR_STATUS_ENDPOINT_UNAVAILABLE = 11,
  SR_STATUS_BUFFER_TOO_SMALL = 12,
  SR_STATUS_PANIC = 13,
  SR_STATUS_OTHER = 14,
} SrStatus;

typedef struct SrIndex SrIndex;

typedef struct SrRetriever SrRetriever;

/**
 * One search result. `row` indexes `sr_index_clip_id`.
 */
typedef struct SrHit {
  uint64_t row;
  double score;
  uint32_t rank;
} SrHit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Message of the last error on this thread; empty if none.
 */
const char *sr_last_error_message(void);

/**
 * `out[i] = profile[i] + emotion[i] + user[i]`.
 *
 * # Safety
 * All four pointers must address `dim` elements.
 */
enum SrStatus sr_compose(const double *profile,
                         const double *emotion,
                         const double *user,
                         uintptr_t dim,
                         double *out_values);

/**
 * # Safety
 * `a` and `b` must address `len` elements; `out_score` must be writable.
 */
enum SrStatus sr_inner_product(const double *a, const double *b, uintptr_t len, double *out_score);

/**
 * Exact index over `n` row-major vectors of length `dim`.
 *
 * # Safety
 * `clip_ids` must hold `n` NUL-terminated strings, `vectors` `n * dim`
 * floats, and `out_index` must be writable.
 */
enum SrStatus sr_index_build_exact(const char *const *clip_ids,
                                   const float *vectors,
                                   uintptr_t n,
                                   uintptr_t dim,
                                   struct SrIndex **out_index);

/**
 * Clustered index; see `sr_index_build_exact` for the layout.
 *
 * # Safety
 * As for `sr_index_build_exact`.
 */
enum SrStatus sr_index_build_clustered(const char *const *clip_ids,
                                       const float *vectors,
                                       uintptr_t n,
                                       uintptr_t dim,
                                       uintptr_t n_clusters,
                                       uint64_t seed,
                                       struct SrIndex **out_index);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_index` writable.
 */
enum SrStatus sr_index_load(const char *path, struct SrIndex **out_index);

/**
 * # Safety
 * `index` must come from this library; `path` must be NUL-terminated.
 */
enum SrStatus sr_index_save(const struct SrIndex *index, const char *path);

/**
 * # Safety
 * `index` must come from this library; `out_count` must be writable.
 */
enum SrStatus sr_index_count(const struct SrIndex *index, uintptr_t *out_count);

/**
 * # Safety
 * `index` must come from this library; `out_dim` must be writable.
 */
enum SrStatus sr_index_dim(const struct SrIndex *index, uintptr_t *out_dim);

/**
 * Top-`k` search. `probes = 0` uses the default probe count. Writes at most
 * `capacity` hits and the number written to `out_len`.
 *
 * # Safety
 * `query` must address `dim` elements, `out_hits` `capacity` slots.
 */
enum SrStatus sr_index_search(const struct SrIndex *index,
                              const double *query,
                              uintptr_t dim,
                              uintptr_t k,
                              uintptr_t probes,
                              struct SrHit *out_hits,
                              uintptr_t capacity,
                              uintptr_t *out_len);

/**
 * Clip id of `row`, owned by the index; NULL when out of range.
 *
 * # Safety
 * `index` must come from this library.
 */
const char *sr_index_clip_id(const struct SrIndex *index, uint64_t row);

/**
 * # Safety
 * `index` must come from this library and not be used afterwards.
 */
void sr_index_free(struct SrIndex *index);

/**
 * Opens an index file (with `records.jsonl` beside it) using the offline
 * reference embedders with `seed`.
 *
 * # Safety
 * `index_path` must be NUL-terminated and `out_retriever` writable.
 */
enum SrStatus sr_retriever_open(const char *index_path,
                                uint64_t seed,
                                struct SrRetriever **out_retriever);

/**
 * Runs one retrieval. `request_json` has the same shape as the HTTP
 * `/v1/retrieve` body; the script must be inline on first use of its id.
 * On success `*out_json` receives the bundle JSON.
 *
 * # Safety
 * `retriever` must come from this library; `request_json` must be
 * NUL-terminated; `out_json` must be writable.
 */
enum SrStatus sr_retriever_retrieve_json(const struct SrRetriever *retriever,
                                         const char *request_json,
                                         char **out_json);

/**
 * # Safety
 * `retriever` must come from this library; `out_count` writable.
 */
enum SrStatus sr_retriever_record_count(const struct SrRetriever *retriever, uintptr_t *out_count);

/**
 * # Safety
 * `retriever` must come from this library and not be used afterwards.
 */
void sr_retriever_free(struct SrRetriever *retriever);

/**
 * # Safety
 * `s` must be a string returned by this library, or NULL.
 */
void sr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STYLERAG_H */
