#ifndef CBRE_H
#define CBRE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `Ok` is 0; everything else is a failure.
typedef enum CbreStatus {
  CBRE_STATUS_OK = 0,
  // A required pointer argument was null.
  CBRE_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  CBRE_STATUS_INVALID_UTF8 = 2,
  // A JSON document did not parse or failed validation.
  CBRE_STATUS_MALFORMED = 3,
  // An argument lies outside the domain of the quantity.
  CBRE_STATUS_DOMAIN = 4,
  // The model is outside the regime the quantity needs.
  CBRE_STATUS_REGIME = 5,
  // A numerical routine failed to converge or diverged.
  CBRE_STATUS_NUMERICAL = 6,
  // A Rust panic was caught.
  CBRE_STATUS_PANIC = 7,
} CbreStatus;

// Opaque model handle.
typedef struct CbreModel CbreModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null. Valid until the next call
// into the library on the same thread; do not free.
const char *cbre_last_error(void);

// Library version as a static string.
const char *cbre_version(void);

// Parse a model document and return a handle in `*out`.
//
// # Safety
// `json` is a nul-terminated string and `out` a writable pointer.
enum CbreStatus cbre_model_from_json(const char *json, struct CbreModel **out);

// Release a handle. Null is ignored.
//
// # Safety
// `m` is null or a handle not yet freed.
void cbre_model_free(struct CbreModel *m);

// The model serialised back to JSON.
//
// # Safety
// `m` is a live handle and `out` a writable pointer.
enum CbreStatus cbre_model_to_json(const struct CbreModel *m, char **out);

// Classification report (JSON) in `*out`; free with [`cbre_string_free`].
//
// # Safety
// `m` is a live handle and `out` a writable pointer.
enum CbreStatus cbre_classify_json(const struct CbreModel *m, char **out);

// `P_x(T_0 < T_y)` for a jump-free model with `γ > 0`.
//
// # Safety
// `m` is a live handle and `out` a writable pointer.
enum CbreStatus cbre_hitting_prob(const struct CbreModel *m, double x, double y, double *out);

// `E_x[e^{-λ T_a}]` for a logistic model.
//
// # Safety
// `m` is a live handle and `out` a writable pointer.
enum CbreStatus cbre_laplace_hitting_time(const struct CbreModel *m,
                                          double x,
                                          double a,
                                          double lambda,
                                          double *out);

// `E_x[T_0]` for a logistic model.
//
// # Safety
// `m` is a live handle and `out` a writable pointer.
enum CbreStatus cbre_mean_extinction_time(const struct CbreModel *m, double x, double *out);

// Monte Carlo summary (JSON) in `*out`. `config_json` is an experiment
// document whose `simulation` and `analytics` sections are used; its
// `model`, if any, is replaced by the handle's.
//
// # Safety
// `m` is a live handle, `config_json` a nul-terminated string and `out`
// a writable pointer.
enum CbreStatus cbre_simulate_json(const struct CbreModel *m, const char *config_json, char **out);

// Release a string returned by the library. Null is ignored.
//
// # Safety
// `s` is null or a string from this library not yet freed.
void cbre_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBRE_H */
