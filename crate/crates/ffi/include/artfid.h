#ifndef ARTFID_H
#define ARTFID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ArtfidStatus {
  ARTFID_STATUS_OK = 0,
  ARTFID_STATUS_INVALID_ARGUMENT = 2,
  ARTFID_STATUS_FORMAT = 3,
  ARTFID_STATUS_NUMERICAL = 4,
  ARTFID_STATUS_STATISTICAL = 5,
  ARTFID_STATUS_IO = 6,
  ARTFID_STATUS_NULL_POINTER = 7,
  ARTFID_STATUS_PANIC = 8,
} ArtfidStatus;

/**
 * Square pairwise win-count matrix.
 */
typedef struct ArtfidComparisons ArtfidComparisons;

/**
 * Row-major `n_rows x n_cols` embedding matrix.
 */
typedef struct ArtfidEmbeddings ArtfidEmbeddings;

/**
 * Mean and covariance of an embedding set.
 */
typedef struct ArtfidStats ArtfidStats;

typedef struct ArtfidExtrapolationConfig {
  size_t k_points;
  size_t min_subsample;
  uint64_t seed;
  bool subsample_both;
} ArtfidExtrapolationConfig;

/**
 * `fid_infinity` and `artfid_infinity` are NaN unless `has_infinity`.
 */
typedef struct ArtfidResult {
  double fid;
  double fid_infinity;
  double mean_content_distance;
  double artfid;
  double artfid_infinity;
  bool has_infinity;
} ArtfidResult;

typedef struct ArtfidCorrelation {
  double rho;
  double p_two_sided;
  double p_one_sided;
  size_t n;
} ArtfidCorrelation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *artfid_version(void);

/**
 * Kind of the last error on this thread (e.g. "BadMagic"), or NULL.
 */
const char *artfid_last_error_kind(void);

/**
 * Human-readable message of the last error on this thread, or NULL.
 */
const char *artfid_last_error_message(void);

struct ArtfidExtrapolationConfig artfid_extrapolation_config_default(void);

/**
 * Copies `n_rows * n_cols` row-major values. `tag` may be NULL.
 */
enum ArtfidStatus artfid_embeddings_new(const double *data,
                                        size_t n_rows,
                                        size_t n_cols,
                                        const char *tag,
                                        struct ArtfidEmbeddings **out_handle);

/**
 * Reads an AFE1 file.
 */
enum ArtfidStatus artfid_embeddings_read(const char *path, struct ArtfidEmbeddings **out_handle);

/**
 * Writes an AFE1 file (values are stored as f32).
 */
enum ArtfidStatus artfid_embeddings_write(const struct ArtfidEmbeddings *handle, const char *path);

enum ArtfidStatus artfid_embeddings_shape(const struct ArtfidEmbeddings *handle,
                                          size_t *n_rows,
                                          size_t *n_cols);

/**
 * Copies the row-major values into `dst`, which must hold `n_rows * n_cols`.
 */
enum ArtfidStatus artfid_embeddings_data(const struct ArtfidEmbeddings *handle,
                                         double *dst,
                                         size_t len);

void artfid_embeddings_free(struct ArtfidEmbeddings *handle);

enum ArtfidStatus artfid_stats_compute(const struct ArtfidEmbeddings *embeddings,
                                       struct ArtfidStats **out_handle);

enum ArtfidStatus artfid_stats_dim(const struct ArtfidStats *handle, size_t *dim);

/**
 * Copies the mean vector (`dim` values).
 */
enum ArtfidStatus artfid_stats_mean(const struct ArtfidStats *handle, double *dst, size_t len);

/**
 * Copies the covariance matrix row-major (`dim * dim` values).
 */
enum ArtfidStatus artfid_stats_covariance(const struct ArtfidStats *handle,
                                          double *dst,
                                          size_t len);

void artfid_stats_free(struct ArtfidStats *handle);

enum ArtfidStatus artfid_frechet_distance(const struct ArtfidStats *a,
                                          const struct ArtfidStats *b,
                                          double *distance);

enum ArtfidStatus artfid_fid(const struct ArtfidEmbeddings *style,
                             const struct ArtfidEmbeddings *generated,
                             double *fid);

/**
 * Extrapolated FID. `slope` may be NULL.
 */
enum ArtfidStatus artfid_fid_infinity(const struct ArtfidEmbeddings *style,
                                      const struct ArtfidEmbeddings *generated,
                                      const struct ArtfidExtrapolationConfig *config,
                                      double *intercept,
                                      double *slope);

/**
 * ArtFID from per-pair content distances. `config` may be NULL to skip
 * extrapolation.
 */
enum ArtfidStatus artfid_artfid(const double *distances,
                                size_t n_distances,
                                const struct ArtfidEmbeddings *style,
                                const struct ArtfidEmbeddings *generated,
                                const struct ArtfidExtrapolationConfig *config,
                                struct ArtfidResult *result);

/**
 * `wins` is `m * m` row-major; entry `(i, j)` counts wins of `i` over `j`.
 * Entities are labelled "0" to "m-1".
 */
enum ArtfidStatus artfid_comparisons_new(const uint64_t *wins,
                                         size_t m,
                                         struct ArtfidComparisons **out_handle);

/**
 * Reads a comparison CSV (header of labels, then the win-count rows).
 */
enum ArtfidStatus artfid_comparisons_read(const char *path, struct ArtfidComparisons **out_handle);

enum ArtfidStatus artfid_comparisons_len(const struct ArtfidComparisons *handle, size_t *m);

void artfid_comparisons_free(struct ArtfidComparisons *handle);

/**
 * Bradley-Terry scores (summing to 1) into `gamma`, which must hold `m`
 * values. `iterations` may be NULL.
 */
enum ArtfidStatus artfid_bradley_terry(const struct ArtfidComparisons *comparisons,
                                       double tol,
                                       size_t max_iter,
                                       double *gamma,
                                       size_t len,
                                       size_t *iterations);

/**
 * Spearman's rho with t-approximation (or exact, n <= 8) p-values.
 */
enum ArtfidStatus artfid_spearman(const double *x,
                                  const double *y,
                                  size_t n,
                                  bool exact,
                                  struct ArtfidCorrelation *result);

/**
 * Fraction of positions where `predicted[i] == target[i]`.
 */
enum ArtfidStatus artfid_deception_rate(const uint64_t *predicted,
                                        const uint64_t *target,
                                        size_t n,
                                        double *rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARTFID_H */
