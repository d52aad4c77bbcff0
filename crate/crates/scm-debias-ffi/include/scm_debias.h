/* C interface for the scm-debias library. */

#ifndef SCM_DEBIAS_H
#define SCM_DEBIAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Subspace axes.
 */
typedef enum ScmAxis {
  SCM_AXIS_WARMTH = 0,
  SCM_AXIS_COMPETENCE = 1,
} ScmAxis;

/**
 * How operators treat vectors twice the subspace dimension.
 */
typedef enum ScmConcatMode {
  SCM_CONCAT_MODE_BLOCKWISE = 0,
  SCM_CONCAT_MODE_REPLICATED = 1,
} ScmConcatMode;

/**
 * On-disk embedding layouts accepted by `scm_table_load`.
 */
typedef enum ScmFormat {
  SCM_FORMAT_GLOVE_TEXT = 0,
  SCM_FORMAT_WORD2_VEC_TEXT = 1,
} ScmFormat;

/**
 * Mitigation operators.
 */
typedef enum ScmOperator {
  SCM_OPERATOR_SUBTRACTION = 0,
  SCM_OPERATOR_LINEAR_PROJECTION = 1,
  SCM_OPERATOR_PARTIAL_PROJECTION = 2,
} ScmOperator;

/**
 * Smoothing families for Partial Projection. `sigma` is only read for
 * `Gaussian`.
 */
typedef enum ScmSmoothing {
  SCM_SMOOTHING_CONSTANT_ONE = 0,
  SCM_SMOOTHING_INVERSE_ONE_PLUS = 1,
  SCM_SMOOTHING_GAUSSIAN = 2,
} ScmSmoothing;

/**
 * Result codes shared by every fallible function.
 */
typedef enum ScmStatus {
  SCM_STATUS_OK = 0,
  SCM_STATUS_NULL_POINTER = 1,
  SCM_STATUS_INVALID_UTF8 = 2,
  SCM_STATUS_IO = 3,
  SCM_STATUS_PARSE = 4,
  SCM_STATUS_FORMAT = 5,
  SCM_STATUS_ARGUMENT = 6,
  SCM_STATUS_NUMERIC = 7,
  SCM_STATUS_FIT = 8,
  SCM_STATUS_DEGENERATE = 9,
  SCM_STATUS_CONFIG = 10,
  SCM_STATUS_MISSING_TOKEN = 11,
  SCM_STATUS_BUFFER_TOO_SMALL = 12,
  SCM_STATUS_PANIC = 13,
} ScmStatus;

/**
 * Opaque handle to a fitted bias subspace.
 */
typedef struct ScmSubspace ScmSubspace;

/**
 * Opaque handle to a loaded embedding table.
 */
typedef struct ScmTable ScmTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *scm_last_error(void);

/**
 * Library version as a static string.
 */
const char *scm_version(void);

/**
 * Load an embedding table from `path`. On success `*out` owns the handle;
 * release it with `scm_table_free`.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` must be a valid pointer.
 */
enum ScmStatus scm_table_load(const char *path, enum ScmFormat format, struct ScmTable **out);

/**
 * Release a table handle. Accepts null.
 *
 * # Safety
 * `table` must come from `scm_table_load` and not be freed twice.
 */
void scm_table_free(struct ScmTable *table);

/**
 * Vector dimensionality, or 0 for a null handle.
 *
 * # Safety
 * `table` must be a live handle or null.
 */
size_t scm_table_dim(const struct ScmTable *table);

/**
 * Number of stored tokens, or 0 for a null handle.
 *
 * # Safety
 * `table` must be a live handle or null.
 */
size_t scm_table_len(const struct ScmTable *table);

/**
 * Copy the vector for `token` into `out` (capacity `out_len` doubles).
 * Fails with `MissingToken` if the token is absent and `BufferTooSmall`
 * if `out_len` is less than the table dimension.
 *
 * # Safety
 * `out` must point to at least `out_len` writable doubles.
 */
enum ScmStatus scm_table_vector(const struct ScmTable *table,
                                const char *token,
                                double *out,
                                size_t out_len);

/**
 * Cosine similarity of two `len`-dim vectors.
 *
 * # Safety
 * `a` and `b` must point to `len` readable doubles; `out` must be writable.
 */
enum ScmStatus scm_cosine(const double *a, const double *b, size_t len, double *out);

/**
 * Spearman rank correlation of two paired samples of length `n`, with a
 * two-sided p-value. Requires `n >= 3` and non-constant samples.
 *
 * # Safety
 * `xs` and `ys` must point to `n` readable doubles; outputs must be writable.
 */
enum ScmStatus scm_spearman(const double *xs,
                            const double *ys,
                            size_t n,
                            double *rho_out,
                            double *p_out);

/**
 * Fit both warmth and competence directions from JSON antonym-pair files,
 * keeping the `top_k` highest-scored in-vocabulary pairs per axis.
 * `replacements_path` may be null (no token substitutions). On success
 * `*out` owns the handle; release it with `scm_subspace_free`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be a valid pointer.
 */
enum ScmStatus scm_subspace_fit(const struct ScmTable *table,
                                const char *warmth_pairs_path,
                                const char *competence_pairs_path,
                                size_t top_k,
                                bool center,
                                const char *replacements_path,
                                struct ScmSubspace **out);

/**
 * Release a subspace handle. Accepts null.
 *
 * # Safety
 * `subspace` must come from `scm_subspace_fit` and not be freed twice.
 */
void scm_subspace_free(struct ScmSubspace *subspace);

/**
 * Subspace dimensionality, or 0 for a null handle.
 *
 * # Safety
 * `subspace` must be a live handle or null.
 */
size_t scm_subspace_dim(const struct ScmSubspace *subspace);

/**
 * Copy one unit direction of the subspace into `out`.
 *
 * # Safety
 * `out` must point to at least `out_len` writable doubles.
 */
enum ScmStatus scm_subspace_direction(const struct ScmSubspace *subspace,
                                      enum ScmAxis axis,
                                      double *out,
                                      size_t out_len);

/**
 * Apply an operator along both subspace directions to one vector. `vec`
 * may have the subspace dimension d or 2d (concatenated identities); the
 * output has the same length as the input. `beta` and the smoothing
 * parameters are only read by Partial Projection.
 *
 * # Safety
 * `vec` must point to `len` readable doubles and `out` to `len` writable
 * doubles; the two ranges may alias only if identical.
 */
enum ScmStatus scm_debias_vector(const struct ScmSubspace *subspace,
                                 enum ScmOperator operator_,
                                 double beta,
                                 enum ScmSmoothing smoothing,
                                 double sigma,
                                 enum ScmConcatMode concat_mode,
                                 const double *vec,
                                 size_t len,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCM_DEBIAS_H */
