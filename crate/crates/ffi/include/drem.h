#ifndef DREM_H
#define DREM_H

/* Generated by cbindgen from the drem-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DremStatus {
  DREM_STATUS_OK = 0,
  DREM_STATUS_NULL_POINTER = 1,
  DREM_STATUS_INVALID_ARGUMENT = 2,
  DREM_STATUS_IO = 3,
  DREM_STATUS_FORMAT = 4,
  DREM_STATUS_UNKNOWN_ID = 5,
  DREM_STATUS_NUMERICAL_FAILURE = 6,
  DREM_STATUS_PANIC = 7,
} DremStatus;

/**
 * Which per-list metric [`drem_metric`] computes.
 */
typedef enum DremMetric {
  DREM_METRIC_AVERAGE_PRECISION = 0,
  DREM_METRIC_RECIPROCAL_RANK = 1,
  DREM_METRIC_NDCG_AT10 = 2,
} DremMetric;

/**
 * Explanations produced by [`drem_explain`].
 */
typedef struct DremExplanations DremExplanations;

/**
 * A loaded model.
 */
typedef struct DremModel DremModel;

/**
 * One explanation, flattened.
 */
typedef struct DremExplanationInfo {
  uint32_t bridge_type;
  uint32_t bridge_entity;
  double score;
  uint32_t user_hops;
  uint32_t item_hops;
} DremExplanationInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *drem_last_error_message(void);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DremStatus drem_model_load(const char *path, struct DremModel **out);

/**
 * # Safety
 * `model` must come from [`drem_model_load`] and not be used afterwards.
 */
void drem_model_free(struct DremModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DremStatus drem_model_dim(const struct DremModel *model, size_t *out);

/**
 * Number of entities of one type.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DremStatus drem_model_entity_count(const struct DremModel *model,
                                        uint32_t entity_type,
                                        size_t *out);

/**
 * Ranks items for a user and a query given as word ids. Writes up to `k`
 * items and scores, best first, and their number to `out_len`.
 *
 * # Safety
 * `words` must hold `n_words` ids; `out_items` and `out_scores` must have
 * room for `k` values.
 */
enum DremStatus drem_rank(const struct DremModel *model,
                          uint32_t user,
                          const uint32_t *words,
                          size_t n_words,
                          size_t k,
                          uint32_t *out_items,
                          double *out_scores,
                          size_t *out_len);

/**
 * Explanations for why `item` suits `user` under the query.
 *
 * # Safety
 * `words` must hold `n_words` ids and `out` must be a valid pointer.
 */
enum DremStatus drem_explain(const struct DremModel *model,
                             uint32_t user,
                             const uint32_t *words,
                             size_t n_words,
                             uint32_t item,
                             size_t max_hops,
                             size_t top_per_type,
                             double beta,
                             struct DremExplanations **out);

/**
 * # Safety
 * `expl` must be a live handle and `out` a valid pointer.
 */
enum DremStatus drem_explanations_len(const struct DremExplanations *expl, size_t *out);

/**
 * # Safety
 * `expl` must be a live handle and `out` a valid pointer.
 */
enum DremStatus drem_explanations_get(const struct DremExplanations *expl,
                                      size_t index,
                                      struct DremExplanationInfo *out);

/**
 * # Safety
 * `expl` must come from [`drem_explain`] and not be used afterwards.
 */
void drem_explanations_free(struct DremExplanations *expl);

/**
 * One metric of a ranked list of ids against a set of relevant ids.
 *
 * # Safety
 * `ranked` and `relevant` must hold `n_ranked` and `n_relevant` ids.
 */
enum DremStatus drem_metric(enum DremMetric metric,
                            const uint32_t *ranked,
                            size_t n_ranked,
                            const uint32_t *relevant,
                            size_t n_relevant,
                            double *out);

/**
 * Paired Fisher randomization p-value of two per-query score lists.
 *
 * # Safety
 * `a` and `b` must each hold `n` values.
 */
enum DremStatus drem_fisher_randomization(const double *a,
                                          const double *b,
                                          size_t n,
                                          size_t iterations,
                                          uint64_t seed,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DREM_H */
