#ifndef NCVN_H
#define NCVN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum NcvnStatus {
  NCVN_STATUS_OK = 0,
  NCVN_STATUS_NULL_POINTER = 1,
  NCVN_STATUS_INVALID_UTF8 = 2,
  NCVN_STATUS_PARSE = 3,
  NCVN_STATUS_ARITY = 4,
  NCVN_STATUS_INVALID_ARGUMENT = 5,
  NCVN_STATUS_INFEASIBLE = 6,
  NCVN_STATUS_NUMERICAL = 7,
  NCVN_STATUS_IO = 8,
  NCVN_STATUS_PANIC = 9,
} NcvnStatus;

/**
 * Opaque polynomial handle.
 */
typedef struct NcvnPoly NcvnPoly;

/**
 * Opaque matrix-tuple handle.
 */
typedef struct NcvnTuple NcvnTuple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *ncvn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ncvn_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ncvn_string_free(char *s);

/**
 * Parse `text` as a polynomial in `arity` letters.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcvnStatus ncvn_poly_parse(const char *text, size_t arity, struct NcvnPoly **out);

/**
 * The family member `q_n = Σ_{j≤n} x*^j x^j + 1 − x x*`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NcvnStatus ncvn_poly_qn(size_t n, struct NcvnPoly **out);

/**
 * # Safety
 * `p` must be null or a handle from this library that has not been freed.
 */
void ncvn_poly_free(struct NcvnPoly *p);

/**
 * Degree of `p`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t ncvn_poly_degree(const struct NcvnPoly *p);

/**
 * Number of letters of `p`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t ncvn_poly_arity(const struct NcvnPoly *p);

/**
 * Canonical text of `p`; free with `ncvn_string_free`. Null on a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
char *ncvn_poly_to_string(const struct NcvnPoly *p);

/**
 * Build a tuple of `arity` square matrices of size `dim`.
 *
 * # Safety
 * `re` and `im` must each point to `arity * dim * dim` doubles; `out` must
 * be a valid pointer.
 */
enum NcvnStatus ncvn_tuple_new(size_t arity,
                               size_t dim,
                               const double *re,
                               const double *im,
                               struct NcvnTuple **out);

/**
 * Parse a tuple from its JSON form `{"m", "k", "re", "im"}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcvnStatus ncvn_tuple_from_json(const char *json, struct NcvnTuple **out);

/**
 * JSON form of `t`; free with `ncvn_string_free`. Null on a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
char *ncvn_tuple_to_json(const struct NcvnTuple *t);

/**
 * Matrix size of `t`, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t ncvn_tuple_dim(const struct NcvnTuple *t);

/**
 * Number of matrices in `t`, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t ncvn_tuple_arity(const struct NcvnTuple *t);

/**
 * # Safety
 * `t` must be null or a handle from this library that has not been freed.
 */
void ncvn_tuple_free(struct NcvnTuple *t);

/**
 * `‖p(t)‖` in the operator norm.
 *
 * # Safety
 * `p` and `t` must be live handles; `out_norm` a valid pointer.
 */
enum NcvnStatus ncvn_evaluate_norm(const struct NcvnPoly *p,
                                   const struct NcvnTuple *t,
                                   double *out_norm);

/**
 * Multi-start maximization of `‖p(t)‖` over dimension-`dim` members of the
 * class described by `class_spec` (`contraction`, `nilpotent:n`,
 * `shifted:RE,IM,n`, `row:m`, `column-isometry:m`). `out_argmax` may be
 * null; otherwise it receives a new tuple handle.
 *
 * # Safety
 * `p` must be a live handle, `class_spec` a NUL-terminated string and
 * `out_value` a valid pointer.
 */
enum NcvnStatus ncvn_maximize(const struct NcvnPoly *p,
                              const char *class_spec,
                              size_t dim,
                              size_t restarts,
                              uint64_t seed,
                              double *out_value,
                              struct NcvnTuple **out_argmax);

/**
 * Numerical radius `max |⟨Av, v⟩|` of a `dim × dim` matrix.
 *
 * # Safety
 * `re` and `im` must each point to `dim * dim` doubles; `out` must be valid.
 */
enum NcvnStatus ncvn_numerical_radius(size_t dim, const double *re, const double *im, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCVN_H */
