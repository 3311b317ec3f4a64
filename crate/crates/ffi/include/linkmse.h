#ifndef LINKMSE_H
#define LINKMSE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LmStatus {
  LM_STATUS_OK = 0,
  LM_STATUS_NULL_POINTER = 1,
  LM_STATUS_INVALID_ARGUMENT = 2,
  LM_STATUS_IO = 3,
  LM_STATUS_PARSE = 4,
  LM_STATUS_NUMERICAL = 5,
  LM_STATUS_PANIC = 6,
} LmStatus;

typedef enum LmSizePrior {
  LM_SIZE_PRIOR_RECIPROCAL = 0,
  LM_SIZE_PRIOR_UNIFORM = 1,
} LmSizePrior;

typedef struct LmAveraged LmAveraged;

typedef struct LmCandidates LmCandidates;

typedef struct LmChain LmChain;

typedef struct LmPosterior LmPosterior;

typedef struct LmTable LmTable;

/**
 * Variance split of an averaged posterior. Shares are fractions of `total`.
 */
typedef struct LmDecomposition {
  double total;
  double linkage;
  double residual;
  double linkage_share;
  double residual_share;
} LmDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lm_version(void);

/**
 * Empty table over `k` lists.
 *
 * # Safety
 * `table` must be a valid pointer to writable storage.
 */
enum LmStatus lm_table_new(size_t k, struct LmTable **table);

/**
 * Table from dense counts indexed by pattern bitmask (bit `j-1` set when
 * list `j` caught the individual); entry 0 is ignored.
 *
 * # Safety
 * `counts` must point to `len` values; `table` must be writable.
 */
enum LmStatus lm_table_from_dense(size_t k,
                                  const uint64_t *counts,
                                  size_t len,
                                  struct LmTable **table);

/**
 * Reads a `pattern,count` CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `table` must be writable.
 */
enum LmStatus lm_table_read_csv(const char *path, struct LmTable **table);

/**
 * Adds `count` individuals with capture pattern `pattern`.
 *
 * # Safety
 * `table` must come from this library.
 */
enum LmStatus lm_table_add(struct LmTable *table, uint32_t pattern, uint64_t count);

/**
 * Observed individuals, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
uint64_t lm_table_n_obs(const struct LmTable *table);

/**
 * # Safety
 * `table` must be null or come from this library, and not be used again.
 */
void lm_table_free(struct LmTable *table);

/**
 * Posterior of `N` under one decomposable model, named like `[1,2][3]`,
 * with constant prior counts `alpha`.
 *
 * # Safety
 * `table` must come from this library, `model` must be NUL-terminated and
 * `posterior` writable.
 */
enum LmStatus lm_posterior_graphical(const struct LmTable *table,
                                     const char *model,
                                     double alpha,
                                     enum LmSizePrior prior,
                                     uint64_t n_max,
                                     struct LmPosterior **posterior);

/**
 * Model-averaged posterior over every decomposable model. When `weights`
 * is non-null, up to `weights_len` posterior model weights are written in
 * the library's model order and `num_models` (if non-null) receives the
 * model count.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum LmStatus lm_posterior_bma(const struct LmTable *table,
                               double alpha,
                               enum LmSizePrior prior,
                               uint64_t n_max,
                               struct LmPosterior **posterior,
                               double *weights,
                               size_t weights_len,
                               size_t *num_models);

/**
 * Posterior of `N` from the latent-class sampler, as the pmf of its draws.
 *
 * # Safety
 * `table` must come from this library and `posterior` be writable.
 */
enum LmStatus lm_posterior_lcmcr(const struct LmTable *table,
                                 size_t strata,
                                 size_t iterations,
                                 size_t burnin,
                                 size_t thin,
                                 uint64_t seed,
                                 struct LmPosterior **posterior);

/**
 * Smallest `N` with stored probability.
 *
 * # Safety
 * `posterior` must be null or come from this library.
 */
uint64_t lm_posterior_start(const struct LmPosterior *posterior);

/**
 * Number of stored probabilities.
 *
 * # Safety
 * `posterior` must be null or come from this library.
 */
size_t lm_posterior_len(const struct LmPosterior *posterior);

/**
 * Copies up to `len` probabilities for `N = start, start + 1, ...`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum LmStatus lm_posterior_probs(const struct LmPosterior *posterior, double *buf, size_t len);

/**
 * # Safety
 * `posterior` must be null or come from this library.
 */
double lm_posterior_mean(const struct LmPosterior *posterior);

/**
 * # Safety
 * `posterior` must be null or come from this library.
 */
double lm_posterior_variance(const struct LmPosterior *posterior);

/**
 * Equal-tailed credible interval at `level` in (0, 1).
 *
 * # Safety
 * `lower` and `upper` must be writable.
 */
enum LmStatus lm_posterior_interval(const struct LmPosterior *posterior,
                                    double level,
                                    uint64_t *lower,
                                    uint64_t *upper);

/**
 * # Safety
 * `posterior` must be null or come from this library, and not be used again.
 */
void lm_posterior_free(struct LmPosterior *posterior);

/**
 * Equal-weight average of `count` per-draw posteriors.
 *
 * # Safety
 * `posteriors` must point to `count` handles from this library.
 */
enum LmStatus lm_average(const struct LmPosterior *const *posteriors,
                         size_t count,
                         struct LmAveraged **averaged);

/**
 * New handle holding the pooled posterior.
 *
 * # Safety
 * `averaged` must come from this library and `posterior` be writable.
 */
enum LmStatus lm_averaged_pooled(const struct LmAveraged *averaged, struct LmPosterior **posterior);

/**
 * # Safety
 * `averaged` must come from this library and `decomposition` be writable.
 */
enum LmStatus lm_averaged_decomposition(const struct LmAveraged *averaged,
                                        struct LmDecomposition *decomposition);

/**
 * # Safety
 * `averaged` must be null or come from this library, and not be used again.
 */
void lm_averaged_free(struct LmAveraged *averaged);

/**
 * Loads a candidate directory written by the `compare` stage.
 *
 * # Safety
 * `dir` must be NUL-terminated and `candidates` writable.
 */
enum LmStatus lm_candidates_read(const char *dir, struct LmCandidates **candidates);

/**
 * # Safety
 * `candidates` must be null or come from this library.
 */
size_t lm_candidates_num_pairs(const struct LmCandidates *candidates);

/**
 * # Safety
 * `candidates` must be null or come from this library, and not be used
 * again.
 */
void lm_candidates_free(struct LmCandidates *candidates);

/**
 * Runs the partition sampler. `priors_path` may be null for untruncated
 * priors.
 *
 * # Safety
 * `candidates` must come from this library, `priors_path` must be null or
 * NUL-terminated, and `chain` writable.
 */
enum LmStatus lm_link_run(const struct LmCandidates *candidates,
                          const char *priors_path,
                          size_t iterations,
                          size_t burnin,
                          size_t thin,
                          uint64_t seed,
                          struct LmChain **chain);

/**
 * Number of saved draws.
 *
 * # Safety
 * `chain` must be null or come from this library.
 */
size_t lm_chain_len(const struct LmChain *chain);

/**
 * Capture-history table of draw `index` over all lists.
 *
 * # Safety
 * Handles must come from this library and `table` be writable.
 */
enum LmStatus lm_chain_table(const struct LmChain *chain,
                             const struct LmCandidates *candidates,
                             size_t index,
                             struct LmTable **table);

/**
 * Writes the chain in the draw-file format.
 *
 * # Safety
 * Handles must come from this library and `path` be NUL-terminated.
 */
enum LmStatus lm_chain_write(const struct LmChain *chain,
                             const struct LmCandidates *candidates,
                             const char *path);

/**
 * # Safety
 * `chain` must be null or come from this library, and not be used again.
 */
void lm_chain_free(struct LmChain *chain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINKMSE_H */
