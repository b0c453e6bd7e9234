#ifndef KOOPMAN_ROA_H
#define KOOPMAN_ROA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KrStatus {
  KR_STATUS_OK = 0,
  KR_STATUS_NULL_ARGUMENT = 1,
  KR_STATUS_INVALID_UTF8 = 2,
  KR_STATUS_INVALID_CONFIG = 3,
  KR_STATUS_INVALID_ARGUMENT = 4,
  KR_STATUS_NOT_HURWITZ = 5,
  KR_STATUS_NUMERICAL_FAILURE = 6,
  KR_STATUS_INCOMPATIBLE = 7,
  KR_STATUS_NESTING_VIOLATED = 8,
  KR_STATUS_IO = 9,
  KR_STATUS_PANIC = 10,
} KrStatus;

/**
 * A certificate; free with [`kr_certificate_free`].
 */
typedef struct KrCertificate KrCertificate;

/**
 * Certificates whose nesting was verified; free with [`kr_combined_free`].
 */
typedef struct KrCombined KrCombined;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next failing call.
 */
const char *kr_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *kr_version(void);

/**
 * Runs the pipeline described by a JSON run configuration.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KrStatus kr_certify_json(const char *config_json, struct KrCertificate **out);

/**
 * Parses a certificate previously written as JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KrStatus kr_certificate_from_json(const char *json, struct KrCertificate **out);

/**
 * Serialises a certificate; free the result with [`kr_string_free`]. Null on failure.
 *
 * # Safety
 * `cert` must be a live handle or null.
 */
char *kr_certificate_to_json(const struct KrCertificate *cert);

/**
 * # Safety
 * `cert` must be a live handle or null.
 */
bool kr_certificate_is_certified(const struct KrCertificate *cert);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `cert` must be a live handle or null.
 */
size_t kr_certificate_dim(const struct KrCertificate *cert);

/**
 * Writes `γ₁` and `γ₂` (levels of the rescaled `V`).
 *
 * # Safety
 * `cert` must be a live handle; `gamma1` and `gamma2` valid pointers.
 */
enum KrStatus kr_certificate_levels(const struct KrCertificate *cert,
                                    double *gamma1,
                                    double *gamma2);

/**
 * `V(x)` at a point given in original coordinates.
 *
 * # Safety
 * `x` must point to `n` readable values and `value` be a valid pointer.
 */
enum KrStatus kr_certificate_eval(const struct KrCertificate *cert,
                                  const double *x,
                                  size_t n,
                                  double *value);

/**
 * # Safety
 * `cert` must come from this library and not be used afterwards.
 */
void kr_certificate_free(struct KrCertificate *cert);

/**
 * Checks the nesting of `count` certificates on `samples` points. On
 * [`KrStatus::NestingViolated`] the witness (original coordinates) is copied into
 * `witness` when it is non-null and holds `witness_len ≥ dim` values.
 *
 * # Safety
 * `certs` must point to `count` live handles; `out` must be valid; `witness` null or
 * writable for `witness_len` values.
 */
enum KrStatus kr_combine(const struct KrCertificate *const *certs,
                         size_t count,
                         size_t samples,
                         uint64_t seed,
                         struct KrCombined **out,
                         double *witness,
                         size_t witness_len);

/**
 * Whether `x` (original coordinates) lies in the union of the outer sets.
 *
 * # Safety
 * `combined` must be a live handle and `x` point to `n` readable values.
 */
bool kr_combined_contains(const struct KrCombined *combined, const double *x, size_t n);

/**
 * # Safety
 * `combined` must come from this library and not be used afterwards.
 */
void kr_combined_free(struct KrCombined *combined);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void kr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KOOPMAN_ROA_H */
