/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum LgbStatus {
  LGB_STATUS_OK = 0,
  // A required pointer argument was null.
  LGB_STATUS_NULL_ARGUMENT = 1,
  // Wrong length, malformed string or unsupported request.
  LGB_STATUS_INVALID_ARGUMENT = 2,
  // The configuration could not be parsed or built.
  LGB_STATUS_CONFIG = 3,
  // A numerical routine failed (group membership, range, integration).
  LGB_STATUS_NUMERICAL = 4,
  // A panic was caught at the boundary.
  LGB_STATUS_INTERNAL = 5,
} LgbStatus;

// A matrix Lie group with a basis of its algebra.
typedef struct LgbGroup LgbGroup;

// A scenario configuration together with the objects built from it.
typedef struct LgbScenario LgbScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or null when the
// last call succeeded. Release with [`lgb_string_free`].
char *lgb_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void lgb_string_free(char *s);

// Library version as a static NUL-terminated string.
const char *lgb_version(void);

// Creates a group from a preset name such as "so3" or "r3".
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum LgbStatus lgb_group_from_preset(const char *name, struct LgbGroup **out);

// Creates a group from a JSON descriptor (name, kind, matrix_dim, basis).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LgbStatus lgb_group_from_json(const char *json, struct LgbGroup **out);

// # Safety
// `g` must come from a group constructor, or be null.
void lgb_group_free(struct LgbGroup *g);

// Dimension of the Lie algebra; 0 for a null handle.
//
// # Safety
// `g` must be a live group handle or null.
size_t lgb_group_dim(const struct LgbGroup *g);

// Size `k` of the `k x k` matrices; 0 for a null handle.
//
// # Safety
// `g` must be a live group handle or null.
size_t lgb_group_matrix_dim(const struct LgbGroup *g);

// `exp` of algebra coordinates `xi` (length `dim`) into a row-major
// matrix `out` (length `k * k`).
//
// # Safety
// Pointers must be valid for the given lengths.
enum LgbStatus lgb_group_exp(const struct LgbGroup *g,
                             const double *xi,
                             size_t xi_len,
                             double *out,
                             size_t out_len);

// `log` of a row-major group element into algebra coordinates.
//
// # Safety
// Pointers must be valid for the given lengths.
enum LgbStatus lgb_group_log(const struct LgbGroup *g,
                             const double *m,
                             size_t m_len,
                             double *out,
                             size_t out_len);

// `Ad_m xi` in algebra coordinates.
//
// # Safety
// Pointers must be valid for the given lengths.
enum LgbStatus lgb_group_adjoint(const struct LgbGroup *g,
                                 const double *m,
                                 size_t m_len,
                                 const double *xi,
                                 size_t xi_len,
                                 double *out,
                                 size_t out_len);

// Lie bracket `[a, b]` in algebra coordinates; all arrays have length `dim`.
//
// # Safety
// Pointers must be valid for `len` values.
enum LgbStatus lgb_group_bracket(const struct LgbGroup *g,
                                 const double *a,
                                 const double *b,
                                 size_t len,
                                 double *out);

// Creates a scenario from a preset name such as "principal-so3".
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum LgbStatus lgb_scenario_from_preset(const char *name, struct LgbScenario **out);

// Creates a scenario from a JSON configuration.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LgbStatus lgb_scenario_from_json(const char *json, struct LgbScenario **out);

// # Safety
// `s` must come from a scenario constructor, or be null.
void lgb_scenario_free(struct LgbScenario *s);

// Runs the check suite and writes the JSON-lines report, without timing
// data, to `out_report` (release with [`lgb_string_free`]). A seed or
// sample count of 0 keeps the configured value. Failing checks are not
// an error: their number goes to `out_failed`.
//
// # Safety
// `s` must be a live handle; output pointers must be valid.
enum LgbStatus lgb_scenario_validate(const struct LgbScenario *s,
                                     uint64_t seed,
                                     size_t samples,
                                     char **out_report,
                                     size_t *out_failed);

// Transports the fiber element `exp(fiber)` along a configured curve
// (`curve_id` null selects the first) and writes the end fiber element,
// row-major, to `out`. `fiber` null starts at the identity.
//
// # Safety
// `s` must be a live handle; pointers must be valid for their lengths.
enum LgbStatus lgb_scenario_transport(const struct LgbScenario *s,
                                      const char *curve_id,
                                      const double *fiber,
                                      size_t fiber_len,
                                      double *out,
                                      size_t out_len,
                                      double *out_membership);

// Curvature `F` of a connection jet in a gauge jet scenario. `a` holds
// `A[mu][k]` (length `n * d`), `da` holds `dA[mu][nu][k]` and `out`
// receives `F[mu][nu][k]` (both length `n * n * d`).
//
// # Safety
// `s` must be a live handle; pointers must be valid for their lengths.
enum LgbStatus lgb_scenario_utiyama_curvature(const struct LgbScenario *s,
                                              const double *a,
                                              size_t a_len,
                                              const double *da,
                                              size_t da_len,
                                              double *out,
                                              size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
