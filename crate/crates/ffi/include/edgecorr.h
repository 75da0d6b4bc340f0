#ifndef EDGECORR_H
#define EDGECORR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcStatus {
  EC_STATUS_OK = 0,
  EC_STATUS_NULL_POINTER = 1,
  EC_STATUS_INVALID_UTF8 = 2,
  EC_STATUS_INVALID_ARGUMENT = 3,
  EC_STATUS_IO = 4,
  EC_STATUS_NOT_FOUND = 5,
  EC_STATUS_INTERNAL = 6,
} EcStatus;

/**
 * Streaming engine: windows, clusters and pairwise correlations.
 */
typedef struct EcPipeline EcPipeline;

/**
 * Read access to a stored cluster history.
 */
typedef struct EcStore EcStore;

/**
 * Window and cluster parameters of a pipeline.
 */
typedef struct EcParams {
  double tau;
  double lambda;
  size_t k;
  double gamma;
  size_t alpha;
  size_t min_store;
  uint64_t seed;
} EcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *ec_last_error(void);

/**
 * `τ = 60`, `λ = 30`, `k = 400`, `γ = 0.8`, `α = 10`, stored components of
 * at least 10 nodes, seed 0.
 */
struct EcParams ec_default_params(void);

/**
 * Creates a pipeline over `count` named streams. `data_dir` may be null for
 * an in-memory store.
 */
enum EcStatus ec_pipeline_new(const char *const *names,
                              size_t count,
                              const struct EcParams *params,
                              const char *data_dir,
                              struct EcPipeline **out_pipeline);

/**
 * Offers one edge to stream `stream`. `routed` receives the number of
 * windows it entered; 0 means it arrived after all of them had closed.
 */
enum EcStatus ec_pipeline_push(struct EcPipeline *pipeline,
                               size_t stream,
                               double timestamp,
                               const char *src,
                               const char *dst,
                               size_t *routed);

/**
 * Current correlation of streams `a` and `b` as the exact ratio
 * `numerator / denominator` (0/0 before either holds a cluster).
 */
enum EcStatus ec_pipeline_correlation(const struct EcPipeline *pipeline,
                                      const char *a,
                                      const char *b,
                                      uint64_t *numerator,
                                      uint64_t *denominator);

/**
 * Correlation matrix at time `t` as tab-separated text.
 */
enum EcStatus ec_pipeline_matrix(const struct EcPipeline *pipeline, double t, char **out_text);

/**
 * Closes the remaining windows and hands over the store. Always consumes
 * `pipeline`, even on failure. `out_summary` may be null.
 */
enum EcStatus ec_pipeline_finish(struct EcPipeline *pipeline,
                                 struct EcStore **out_store,
                                 char **out_summary);

void ec_pipeline_free(struct EcPipeline *pipeline);

/**
 * Opens (or creates) the store in `data_dir`.
 */
enum EcStatus ec_store_open(const char *data_dir, struct EcStore **out_store);

/**
 * Stored correlation matrix at time `t` as tab-separated text.
 */
enum EcStatus ec_store_matrix(const struct EcStore *store, double t, char **out_text);

/**
 * Ranks tags correlated with `tags` at time `t`; the outcome is written as
 * JSON with `status`, `hits` and `unknown` fields.
 */
enum EcStatus ec_store_search(const struct EcStore *store,
                              const char *const *tags,
                              size_t count,
                              double t,
                              size_t limit,
                              char **out_json);

void ec_store_free(struct EcStore *store);

/**
 * Neighbor-joining tree, as Newick, of a tab-separated correlation matrix.
 */
enum EcStatus ec_tree_from_matrix(const char *matrix, char **out_newick);

/**
 * Estimated move distance between two Newick trees from depth-`k`
 * signatures.
 */
enum EcStatus ec_tree_distance(const char *first, const char *second, size_t k, size_t *distance);

void ec_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDGECORR_H */
