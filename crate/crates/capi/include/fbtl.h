#ifndef FBTL_H
#define FBTL_H

/* Generated by cbindgen from fbtl-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum {
  FBTL_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  FBTL_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FBTL_STATUS_UTF8 = 2,
  /**
   * Arguments were rejected (unknown name, bad dimension, bad value).
   */
  FBTL_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The computation is numerically degenerate or underdetermined.
   */
  FBTL_STATUS_NUMERICAL = 4,
  /**
   * The requested family or operation has no implementation.
   */
  FBTL_STATUS_UNSUPPORTED = 5,
  /**
   * Filesystem error.
   */
  FBTL_STATUS_IO = 6,
} FbtlStatus;

/**
 * Opaque feature-set handle (features plus coefficient matrix).
 */
typedef struct FbtlFeatures FbtlFeatures;

/**
 * Opaque relation graph handle.
 */
typedef struct FbtlGraph FbtlGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message for the most recent error on this thread into `buf`
 * (NUL-terminated, truncated to `cap`). Returns the full message length.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (query mode).
 */
uintptr_t fbtl_last_error(char *buf, uintptr_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fbtl_version(void);

/**
 * Builds a graph-family instance. `family` is one of `disconnected`,
 * `clique`, `r-cliques`, `d-regular`, `k-tree`, `star`, `cycle`; `param`
 * carries r, d, or k where applicable.
 *
 * # Safety
 * `family` must be a NUL-terminated string and `out` a valid pointer.
 */
FbtlStatus fbtl_graph_family(const char *family,
                             uintptr_t n,
                             uintptr_t param,
                             uint64_t seed,
                             FbtlGraph **out);

/**
 * Parses the edge-list text format (`n <count>` header, `independent`
 * line, one 1-based `i j` pair per line).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
FbtlStatus fbtl_graph_parse(const char *text, FbtlGraph **out);

/**
 * # Safety
 * `graph` must be a handle from this library or null.
 */
void fbtl_graph_free(FbtlGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle.
 */
uintptr_t fbtl_graph_item_count(const FbtlGraph *graph);

/**
 * Size of the fixed maximal independent set.
 *
 * # Safety
 * `graph` must be a live handle.
 */
uintptr_t fbtl_graph_alpha(const FbtlGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle.
 */
uintptr_t fbtl_graph_edge_count(const FbtlGraph *graph);

/**
 * Synthesizes features on a graph; `coeff_mode` 0 draws simplex rows,
 * 1 draws gaussian rows.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
FbtlStatus fbtl_features_synthesize(const FbtlGraph *graph,
                                    int coeff_mode,
                                    uint64_t seed,
                                    FbtlFeatures **out);

/**
 * Wraps an explicit row-major `n x d` feature matrix. With `alpha > 0`,
 * `basis` names the `alpha` independent items (0-based); with `alpha == 0`
 * a maximal independent row set is selected by pivoted elimination and must
 * reach rank `d`.
 *
 * # Safety
 * `values` must hold `n * d` doubles; `basis` must hold `alpha` indices
 * when `alpha > 0`; `out` must be valid.
 */
FbtlStatus fbtl_features_from_matrix(const double *values,
                                     uintptr_t n,
                                     uintptr_t d,
                                     const uintptr_t *basis,
                                     uintptr_t alpha,
                                     FbtlFeatures **out);

/**
 * # Safety
 * `features` must be a handle from this library or null.
 */
void fbtl_features_free(FbtlFeatures *features);

/**
 * # Safety
 * `features` must be a live handle.
 */
uintptr_t fbtl_features_item_count(const FbtlFeatures *features);

/**
 * # Safety
 * `features` must be a live handle.
 */
uintptr_t fbtl_features_alpha(const FbtlFeatures *features);

/**
 * Copies the `n x alpha` coefficient matrix, row-major, into `out`.
 *
 * # Safety
 * `features` must be a live handle; `out` must hold `n * alpha` doubles.
 */
FbtlStatus fbtl_features_coefficients(const FbtlFeatures *features, double *out);

/**
 * Estimates item scores from aggregate comparison counts.
 *
 * `pairs` holds `m` index pairs `(i_e, j_e)` interleaved as
 * `[i_0, j_0, i_1, j_1, ...]` (0-based); `wins[e]` counts how often `i_e`
 * beat `j_e` out of `k` comparisons. `estimator` selects 0 = feature-aware
 * least squares, 1 = ordinary least squares, 2 = Rank Centrality. Scores
 * are written to `theta_out` (length `n`), unit-normalized.
 *
 * # Safety
 * `features` must be a live handle; `pairs` must hold `2 * m` indices;
 * `wins` must hold `m` counts; `theta_out` must hold `n` doubles.
 */
FbtlStatus fbtl_estimate(const FbtlFeatures *features,
                         const uintptr_t *pairs,
                         const uint64_t *wins,
                         uintptr_t m,
                         uint64_t k,
                         int estimator,
                         double *theta_out);

/**
 * Closed-form minimum sampling probability for recovery with probability
 * `1 - delta`, for the families that admit one.
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` must be valid.
 */
FbtlStatus fbtl_closed_form_threshold(const char *family,
                                      uintptr_t n,
                                      uintptr_t param,
                                      double delta,
                                      double *out);

/**
 * Upper bound on the probability that pairs sampled with rate `p` fail to
 * pin down every basis score (subsets enumerated up to size `q_max`).
 *
 * # Safety
 * `graph` must be a live handle; `out` must be valid.
 */
FbtlStatus fbtl_error_probability_bound(const FbtlGraph *graph,
                                        double p,
                                        uintptr_t q_max,
                                        double *out);

/**
 * Minimax lower bound on the expected normalized score error for the
 * feature structure held by `features`.
 *
 * # Safety
 * `features` must be a live handle; `out` must be valid.
 */
FbtlStatus fbtl_minimax_lower_bound(const FbtlFeatures *features,
                                    double b,
                                    double zeta,
                                    uint64_t k,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBTL_H */
