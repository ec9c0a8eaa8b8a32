#ifndef JACOBI_DECAY_H
#define JACOBI_DECAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JdStatus {
  JD_STATUS_OK = 0,
  JD_STATUS_NULL_POINTER = 1,
  JD_STATUS_INVALID_UTF8 = 2,
  JD_STATUS_INVALID_MODEL = 3,
  JD_STATUS_INVALID_ARGUMENT = 4,
  JD_STATUS_NEAR_SINGULAR = 5,
  JD_STATUS_BUFFER_TOO_SMALL = 6,
  JD_STATUS_NUMERICAL = 7,
  JD_STATUS_PANIC = 8,
} JdStatus;

/**
 * Opaque model handle.
 */
typedef struct JdModel JdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a JSON model description into a new handle written to `out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JdStatus jd_model_from_json(const char *json, struct JdModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `jd_model_from_json` and not be used afterwards.
 */
void jd_model_free(struct JdModel *model);

/**
 * Off-diagonal weight λ_n and diagonal entry q_n at row `n` (1-based).
 *
 * # Safety
 * Pointers must be valid.
 */
enum JdStatus jd_model_entry(const struct JdModel *model, size_t n, double *weight, double *diag);

/**
 * First column of (J_N − z)⁻¹ on rows 1..=`n`, written to `re` and `im`,
 * each of length at least `n`.
 *
 * # Safety
 * `re` and `im` must point to `n` writable doubles.
 */
enum JdStatus jd_resolvent_column(const struct JdModel *model,
                                  size_t n,
                                  double z_re,
                                  double z_im,
                                  double *re,
                                  double *im);

/**
 * Number of eigenvalues of the section on rows `lo..=hi` lying below `x`.
 *
 * # Safety
 * `count` must be valid.
 */
enum JdStatus jd_sturm_count(const struct JdModel *model,
                             size_t lo,
                             size_t hi,
                             double x,
                             size_t *count);

/**
 * Eigenvalues of the section on rows `lo..=hi` inside `(a, b)`, ascending.
 * `*len` is set to the number found. If it exceeds `capacity` nothing is
 * written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `out` must point to `capacity` writable doubles; `len` must be valid.
 */
enum JdStatus jd_eigenvalues_in_window(const struct JdModel *model,
                                       size_t lo,
                                       size_t hi,
                                       double a,
                                       double b,
                                       double *out,
                                       size_t capacity,
                                       size_t *len);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `capacity`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `capacity` writable bytes, or be null with
 * `capacity == 0`.
 */
size_t jd_last_error_message(char *buf, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *jd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JACOBI_DECAY_H */
