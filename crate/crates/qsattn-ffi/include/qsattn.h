#ifndef QSATTN_H
#define QSATTN_H

/* This file is generated by cbindgen from qsattn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible entry point.
typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_ARGUMENT = 2,
  QS_STATUS_SHAPE_MISMATCH = 3,
  QS_STATUS_IO_ERROR = 4,
  QS_STATUS_FORMAT_ERROR = 5,
  QS_STATUS_UTF8_ERROR = 6,
  QS_STATUS_INTERNAL_ERROR = 7,
} QsStatus;

// Attention formulation selector.
typedef enum QsMode {
  QS_MODE_SHARED = 0,
  QS_MODE_COMPONENTWISE = 1,
} QsMode;

// Opaque quaternion tensor handle.
typedef struct QsTensor QsTensor;

// Closed-form MACs model output.
typedef struct QsMacsBreakdown {
  uint64_t projections;
  uint64_t score_stage;
  uint64_t av_stage;
  uint64_t softmax_ops;
  uint64_t score_muls_per_pair;
  uint64_t total;
} QsMacsBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *qs_version(void);

// Message describing the most recent failure on this thread. The pointer
// is valid until the next failing call on the same thread.
const char *qs_last_error_message(void);

// Builds a tensor from four real planes of `len` values each; `len` must
// equal the product of `shape[0..ndim]`.
//
// # Safety
// `shape` must point to `ndim` readable values and each plane pointer to
// `len` readable doubles.
struct QsTensor *qs_tensor_new(const size_t *shape,
                               size_t ndim,
                               const double *q0,
                               const double *q1,
                               const double *q2,
                               const double *q3,
                               size_t len);

// Seeded Gaussian tensor with standard deviation `scale`.
//
// # Safety
// `shape` must point to `ndim` readable values.
struct QsTensor *qs_tensor_random(const size_t *shape,
                                  size_t ndim,
                                  uint64_t seed,
                                  uint64_t stream,
                                  double scale);

// Frees a tensor created by this library. Null is ignored.
//
// # Safety
// `tensor` must be a pointer previously returned by this library and not
// yet freed.
void qs_tensor_free(struct QsTensor *tensor);

// Number of axes.
//
// # Safety
// `tensor` must be a live tensor handle.
size_t qs_tensor_ndim(const struct QsTensor *tensor);

// Elements per plane.
//
// # Safety
// `tensor` must be a live tensor handle.
size_t qs_tensor_len(const struct QsTensor *tensor);

// Copies the shape into `out`, which must hold `qs_tensor_ndim` values.
//
// # Safety
// `tensor` must be live; `out` must be writable for `ndim` values.
enum QsStatus qs_tensor_shape(const struct QsTensor *tensor, size_t *out);

// Copies plane `plane` (0..4) into `out`, which must hold `qs_tensor_len`
// doubles.
//
// # Safety
// `tensor` must be live; `out` must be writable for `len` doubles.
enum QsStatus qs_tensor_plane(const struct QsTensor *tensor, size_t plane, double *out);

// Reads a QTB file.
//
// # Safety
// `path` must be a NUL-terminated string.
struct QsTensor *qs_tensor_read_qtb(const char *path);

// Writes a QTB file.
//
// # Safety
// `tensor` must be live; `path` must be a NUL-terminated string.
enum QsStatus qs_tensor_write_qtb(const struct QsTensor *tensor, const char *path);

// Shared real-valued score matrix `scale * Re(Q ⊗ K†)` as a `[T, T]`
// real tensor.
//
// # Safety
// `q` and `k` must be live tensor handles.
struct QsTensor *qs_shared_score(const struct QsTensor *q, const struct QsTensor *k, double scale);

// The four component score matrices of `scale * (Q ⊗ K^T)`; fills
// `out_components[0..4]` with `[T, T]` real tensors.
//
// # Safety
// `q` and `k` must be live; `out_components` must be writable for 4 slots.
enum QsStatus qs_componentwise_score(const struct QsTensor *q,
                                     const struct QsTensor *k,
                                     double scale,
                                     struct QsTensor **out_components);

// Full single-head attention in the requested formulation. For
// `QS_MODE_SHARED` pass `scale = 1/sqrt(4 d_h)`; for componentwise
// `1/sqrt(d_h)`.
//
// # Safety
// `q`, `k`, `v` must be live tensor handles.
struct QsTensor *qs_attention(const struct QsTensor *q,
                              const struct QsTensor *k,
                              const struct QsTensor *v,
                              double scale,
                              enum QsMode mode);

// Argmax agreement rate between two attention maps (real `[T, T]`
// tensors, plane 0).
//
// # Safety
// `map_a` and `map_b` must be live; `out` must be writable.
enum QsStatus qs_agreement_rate(const struct QsTensor *map_a,
                                const struct QsTensor *map_b,
                                double *out);

// Directional top-k agreement between two attention maps.
//
// # Safety
// `map_a` and `map_b` must be live; `out` must be writable.
enum QsStatus qs_topk_agreement(const struct QsTensor *map_a,
                                const struct QsTensor *map_b,
                                size_t k,
                                double *out);

// Two-sample Kolmogorov-Smirnov statistic.
//
// # Safety
// Sample pointers must be readable for their stated lengths; `out` must be
// writable.
enum QsStatus qs_ks_statistic(const double *a,
                              size_t a_len,
                              const double *b,
                              size_t b_len,
                              double *out);

// Exact 1-Wasserstein distance between empirical distributions.
//
// # Safety
// Sample pointers must be readable for their stated lengths; `out` must be
// writable.
enum QsStatus qs_wasserstein1(const double *a,
                              size_t a_len,
                              const double *b,
                              size_t b_len,
                              double *out);

// Pearson correlation of the two empirical quantile functions at
// `n_quantiles` equispaced probabilities.
//
// # Safety
// Sample pointers must be readable for their stated lengths; `out` must be
// writable.
enum QsStatus qs_quantile_correlation(const double *a,
                                      size_t a_len,
                                      const double *b,
                                      size_t b_len,
                                      size_t n_quantiles,
                                      double *out);

// Analytic MACs model for one attention layer; the default total counts
// the score and AV stages, with projections included when requested.
//
// # Safety
// `out` must be writable.
enum QsStatus qs_macs_model(size_t seq_len,
                            size_t d_model,
                            size_t heads,
                            enum QsMode mode,
                            bool include_projections,
                            struct QsMacsBreakdown *out);

// Worst reconstruction residual of the score decomposition on a seeded
// random instance of the given dimensions.
//
// # Safety
// `out` must be writable.
enum QsStatus qs_decompose_residual(size_t seq_len,
                                    size_t d_in,
                                    size_t d_head,
                                    uint64_t seed,
                                    enum QsMode mode,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSATTN_H */
