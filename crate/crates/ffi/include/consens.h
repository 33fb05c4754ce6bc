#ifndef CONSENS_H
#define CONSENS_H

/* Generated by cbindgen from consens-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  CONSENS_STATUS_OK = 0,
  CONSENS_STATUS_NULL_POINTER = 1,
  CONSENS_STATUS_INVALID_ARGUMENT = 2,
  CONSENS_STATUS_PARSE_ERROR = 3,
  CONSENS_STATUS_IO_ERROR = 4,
  CONSENS_STATUS_INTERNAL_ERROR = 5,
} ConsensStatus;

/**
 * One learner's predictions over a test set (opaque handle).
 */
typedef struct ConsensPredictionMatrix ConsensPredictionMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or NULL when no error has
 * occurred. The caller owns the string and must release it with
 * [`consens_string_free`].
 */
char *consens_last_error_message(void);

/**
 * Releases a string allocated by this library.
 *
 * # Safety
 * `s` must have been returned by a consens function and not yet freed.
 */
void consens_string_free(char *s);

/**
 * Euclidean distance between two probability vectors of length `dim`.
 *
 * # Safety
 * `a` and `b` must point to `dim` readable doubles; `out` must be writable.
 */
ConsensStatus consens_euclidean_distance(const double *a,
                                         const double *b,
                                         uintptr_t dim,
                                         double *out);

/**
 * Minkowski distance of order `order >= 1` between two probability vectors.
 *
 * # Safety
 * `a` and `b` must point to `dim` readable doubles; `out` must be writable.
 */
ConsensStatus consens_minkowski_distance(const double *a,
                                         const double *b,
                                         uintptr_t dim,
                                         double order,
                                         double *out);

/**
 * Sum of the pairwise distances among a prediction, its retrained copy, and
 * the one-hot truth vector.
 *
 * # Safety
 * All three vectors must point to `dim` readable doubles; `out` writable.
 */
ConsensStatus consens_triple_distance(const double *s,
                                      const double *s_copy,
                                      const double *truth,
                                      uintptr_t dim,
                                      double *out);

/**
 * Prune threshold `(1-beta) * max(w) + beta * min(w)`.
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
ConsensStatus consens_prune_threshold(const double *weights,
                                      uintptr_t len,
                                      double beta,
                                      double *out);

/**
 * The prune factor whose threshold equals the mean of `weights`.
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
ConsensStatus consens_ideal_beta(const double *weights, uintptr_t len, double *out);

/**
 * Builds a prediction matrix from a dense row-major `rows x classes`
 * buffer; every row must lie on the probability simplex.
 *
 * # Safety
 * `data` must point to `rows * classes` readable doubles; `out` writable.
 */
ConsensStatus consens_prediction_matrix_new(const double *data,
                                            uintptr_t rows,
                                            uintptr_t classes,
                                            ConsensPredictionMatrix **out);

/**
 * Loads a prediction matrix from the `n p` header text format.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be writable.
 */
ConsensStatus consens_prediction_matrix_load(const char *path, ConsensPredictionMatrix **out);

/**
 * Releases a prediction matrix handle.
 *
 * # Safety
 * `matrix` must have come from a consens constructor and not yet be freed.
 */
void consens_prediction_matrix_free(ConsensPredictionMatrix *matrix);

/**
 * Number of rows (test inputs), or 0 for NULL.
 *
 * # Safety
 * `matrix` must be a live handle or NULL.
 */
uintptr_t consens_prediction_matrix_rows(const ConsensPredictionMatrix *matrix);

/**
 * Number of classes (row dimension), or 0 for NULL.
 *
 * # Safety
 * `matrix` must be a live handle or NULL.
 */
uintptr_t consens_prediction_matrix_classes(const ConsensPredictionMatrix *matrix);

/**
 * Fraction of rows where the two matrices pick the same class.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
ConsensStatus consens_consistency(const ConsensPredictionMatrix *a,
                                  const ConsensPredictionMatrix *b,
                                  double *out);

/**
 * Fraction of rows whose argmax equals the label.
 *
 * # Safety
 * `a` must be a live handle; `labels` must point to `len` readable values;
 * `out` must be writable.
 */
ConsensStatus consens_accuracy(const ConsensPredictionMatrix *a,
                               const uintptr_t *labels,
                               uintptr_t len,
                               double *out);

/**
 * The full pairwise metric report between two learners as a flat JSON
 * object with snake_case keys.
 *
 * # Safety
 * `a`, `b` must be live handles; `labels` must hold `len` values; `ks` must
 * hold `ks_len` values; `out_json` must be writable. Free the string with
 * [`consens_string_free`].
 */
ConsensStatus consens_pair_report_json(const ConsensPredictionMatrix *a,
                                       const ConsensPredictionMatrix *b,
                                       const uintptr_t *labels,
                                       uintptr_t len,
                                       const uintptr_t *ks,
                                       uintptr_t ks_len,
                                       char **out_json);

/**
 * Runs the Monte Carlo bound-verification suite and returns its JSON
 * report. `trials` drives the Euclidean checks, `minkowski_trials` each of
 * the generalized-order checks.
 *
 * # Safety
 * `out_json` must be writable. Free the string with [`consens_string_free`].
 */
ConsensStatus consens_verify_bounds_json(uint64_t trials,
                                         uint64_t minkowski_trials,
                                         uint64_t seed,
                                         char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSENS_H */
