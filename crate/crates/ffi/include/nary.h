#ifndef NARY_H
#define NARY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum NaryStatus {
  NARY_STATUS_OK = 0,
  // Bad parameter or null pointer.
  NARY_STATUS_INVALID_ARGUMENT = 1,
  NARY_STATUS_IO = 2,
  NARY_STATUS_FORMAT = 3,
  NARY_STATUS_DIMENSION_MISMATCH = 4,
  NARY_STATUS_NON_FINITE = 5,
  NARY_STATUS_INCOMPATIBLE = 6,
  NARY_STATUS_NUMERIC = 7,
  // A Rust panic was caught at the boundary.
  NARY_STATUS_INTERNAL = 8,
} NaryStatus;

// Coding method for [`nary_model_train`].
typedef enum NaryMethod {
  NARY_METHOD_LSQ_NARY = 0,
  NARY_METHOD_LSQ_BINARY = 1,
  NARY_METHOD_ITQ = 2,
  NARY_METHOD_PQ = 3,
  NARY_METHOD_CKMEANS = 4,
  NARY_METHOD_OKMEANS = 5,
} NaryMethod;

// Opaque set of n-ary or binary codes.
typedef struct NaryCodes NaryCodes;

// Opaque multi-index hash.
typedef struct NaryIndex NaryIndex;

// Opaque `D x N` real matrix, one point per column.
typedef struct NaryMatrix NaryMatrix;

// Opaque trained coder.
typedef struct NaryModel NaryModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *nary_last_error(void);

// Library version as a static NUL-terminated string.
const char *nary_version(void);

// Copies `dim * count` column-major values into a new matrix.
//
// # Safety
// `values` must point to `dim * count` readable doubles and `out` must be
// writable.
enum NaryStatus nary_matrix_new(size_t dim,
                                size_t count,
                                const double *values,
                                struct NaryMatrix **out);

// Draws a seeded Gaussian mixture.
//
// # Safety
// `out` must be writable.
enum NaryStatus nary_matrix_generate(uint64_t seed,
                                     size_t dim,
                                     size_t count,
                                     size_t clusters,
                                     double spread,
                                     struct NaryMatrix **out);

// Loads a raw-f32 (`NARY`) or, for a `.csv` path, CSV matrix.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum NaryStatus nary_matrix_load(const char *path, struct NaryMatrix **out);

// # Safety
// `m` must come from this library and `path` be NUL-terminated.
enum NaryStatus nary_matrix_save(const struct NaryMatrix *m, const char *path);

// Centers `data` with the mean of `fit` and, if `normalize` is nonzero,
// scales every nonzero column to unit length.
//
// # Safety
// Both matrices must come from this library and `out` be writable.
enum NaryStatus nary_matrix_preprocess(const struct NaryMatrix *fit,
                                       const struct NaryMatrix *data,
                                       int32_t normalize,
                                       struct NaryMatrix **out);

// Dimension `D`, or 0 for a null matrix.
//
// # Safety
// `m` must be null or come from this library.
size_t nary_matrix_dim(const struct NaryMatrix *m);

// Point count `N`, or 0 for a null matrix.
//
// # Safety
// `m` must be null or come from this library.
size_t nary_matrix_count(const struct NaryMatrix *m);

// Copies the column-major values into `out`, which holds `len` doubles.
//
// # Safety
// `out` must point to `len` writable doubles.
enum NaryStatus nary_matrix_copy_values(const struct NaryMatrix *m, double *out, size_t len);

// # Safety
// `m` must be null or come from this library; it must not be used again.
void nary_matrix_free(struct NaryMatrix *m);

// Trains a coder on `train` (already preprocessed). The code uses
// `floor(bit_budget / bits_per_dim)` dimensions of `bits_per_dim` bits;
// binary methods store that many bits times `bits_per_dim`.
//
// # Safety
// `train` must come from this library and `out` be writable.
enum NaryStatus nary_model_train(const struct NaryMatrix *train,
                                 enum NaryMethod method,
                                 size_t bit_budget,
                                 size_t bits_per_dim,
                                 double lambda,
                                 size_t iters,
                                 uint64_t seed,
                                 struct NaryModel **out);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum NaryStatus nary_model_load(const char *path, struct NaryModel **out);

// # Safety
// `model` must come from this library and `path` be NUL-terminated.
enum NaryStatus nary_model_save(const struct NaryModel *model, const char *path);

// Input dimension of the model, or 0 for null.
//
// # Safety
// `model` must be null or come from this library.
size_t nary_model_dim(const struct NaryModel *model);

// # Safety
// Arguments must come from this library and `out` be writable.
enum NaryStatus nary_model_encode(const struct NaryModel *model,
                                  const struct NaryMatrix *data,
                                  struct NaryCodes **out);

// # Safety
// Arguments must come from this library and `out` be writable.
enum NaryStatus nary_model_reconstruct(const struct NaryModel *model,
                                       const struct NaryCodes *codes,
                                       struct NaryMatrix **out);

// # Safety
// `model` must be null or come from this library; it must not be used again.
void nary_model_free(struct NaryModel *model);

// Number of codewords, or 0 for null.
//
// # Safety
// `codes` must be null or come from this library.
size_t nary_codes_count(const struct NaryCodes *codes);

// 1 for packed binary codes, 0 for n-ary codes or null.
//
// # Safety
// `codes` must be null or come from this library.
int32_t nary_codes_is_binary(const struct NaryCodes *codes);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum NaryStatus nary_codes_load(const char *path, struct NaryCodes **out);

// # Safety
// `codes` must come from this library and `path` be NUL-terminated.
enum NaryStatus nary_codes_save(const struct NaryCodes *codes, const char *path);

// # Safety
// `codes` must be null or come from this library; it must not be used again.
void nary_codes_free(struct NaryCodes *codes);

// Indexes `codes`: one table per dimension for n-ary codes, one table per
// `chunk_bits` bits for binary codes (`chunk_bits` is ignored for n-ary).
//
// # Safety
// `codes` must come from this library and `out` be writable.
enum NaryStatus nary_index_build(const struct NaryCodes *codes,
                                 size_t chunk_bits,
                                 struct NaryIndex **out);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum NaryStatus nary_index_load(const char *path, struct NaryIndex **out);

// # Safety
// `index` must come from this library and `path` be NUL-terminated.
enum NaryStatus nary_index_save(const struct NaryIndex *index, const char *path);

// # Safety
// `index` must be null or come from this library; it must not be used again.
void nary_index_free(struct NaryIndex *index);

// Encodes every query column with `model` and retrieves up to `k` ids
// from `index`. Row `q` of `out_ids` (`count * k` entries) receives the
// ids of query `q`, best first; `out_lens[q]` their number.
//
// # Safety
// Handles must come from this library; `out_ids` must hold `count * k`
// and `out_lens` `count` writable entries, `count` being the query count.
enum NaryStatus nary_index_query(const struct NaryIndex *index,
                                 const struct NaryModel *model,
                                 const struct NaryMatrix *queries,
                                 size_t k,
                                 size_t *out_ids,
                                 size_t *out_lens);

// Like [`nary_index_query`] but scans all of `base` with the model's code
// distance.
//
// # Safety
// As for [`nary_index_query`].
enum NaryStatus nary_exhaustive_query(const struct NaryCodes *base,
                                      const struct NaryModel *model,
                                      const struct NaryMatrix *queries,
                                      size_t k,
                                      size_t *out_ids,
                                      size_t *out_lens);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NARY_H */
