#ifndef CDN_H
#define CDN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum CdnStatus {
  CDN_STATUS_OK = 0,
  CDN_STATUS_NULL_POINTER = 1,
  CDN_STATUS_INVALID_UTF8 = 2,
  // Model, evidence, parameter or match text failed to parse.
  CDN_STATUS_PARSE = 3,
  CDN_STATUS_INVALID_QUERY = 4,
  // The model or its parameters are invalid.
  CDN_STATUS_INVALID_MODEL = 5,
  CDN_STATUS_NOT_A_TREE = 6,
  CDN_STATUS_ZERO_EVIDENCE_DENSITY = 7,
  CDN_STATUS_INVALID_MATCH = 8,
  // The output buffer is too small; the needed length was written.
  CDN_STATUS_BUFFER_TOO_SMALL = 9,
  CDN_STATUS_IO = 10,
  // A panic was caught at the boundary.
  CDN_STATUS_INTERNAL = 11,
} CdnStatus;

// Result of one inference call.
typedef struct CdnInference CdnInference;

// A parsed cumulative distribution network.
typedef struct CdnModel CdnModel;

// Rating model parameters plus the learned player skills.
typedef struct CdnRatingSession CdnRatingSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cdn_version(void);

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *cdn_last_error_message(void);

// Parses model text into a new handle.
//
// # Safety
// `source` must be a NUL-terminated string and `model` a writable pointer.
enum CdnStatus cdn_model_parse(const char *source, struct CdnModel **model);

// # Safety
// `model` must come from [`cdn_model_parse`] or be null.
void cdn_model_free(struct CdnModel *model);

// # Safety
// `model` must be a live handle and `count` writable.
enum CdnStatus cdn_model_variable_count(const struct CdnModel *model, uintptr_t *count);

// Runs the structure check and the three validity conditions. `passed`
// receives 1 when all hold and 0 otherwise.
//
// # Safety
// `model` must be a live handle and `passed` writable.
enum CdnStatus cdn_model_check(const struct CdnModel *model,
                               double tolerance,
                               uint64_t seed,
                               int32_t *passed);

// Conditions on `evidence` (`variable = value` lines, may be empty). With
// every variable observed the result holds the joint PDF and `query` must
// be null; otherwise it holds the conditional CDF of `query`.
//
// # Safety
// `model` must be a live handle, `evidence` a NUL-terminated string,
// `query` NUL-terminated or null, and `result` writable.
enum CdnStatus cdn_infer(const struct CdnModel *model,
                         const char *evidence,
                         const char *query,
                         struct CdnInference **result);

// # Safety
// `result` must come from [`cdn_infer`] or be null.
void cdn_inference_free(struct CdnInference *result);

// # Safety
// `result` must be a live handle and `pdf` writable.
enum CdnStatus cdn_inference_root_pdf(const struct CdnInference *result, double *pdf);

// Number of support points of the conditional CDF, 0 for a joint PDF.
//
// # Safety
// `result` must be a live handle and `len` writable.
enum CdnStatus cdn_inference_len(const struct CdnInference *result, uintptr_t *len);

// One row of the conditional CDF. Any output pointer may be null.
//
// # Safety
// `result` must be a live handle; non-null outputs must be writable.
enum CdnStatus cdn_inference_row(const struct CdnInference *result,
                                 uintptr_t index,
                                 double *support,
                                 double *mu,
                                 double *lambda,
                                 double *cdf);

// New rating session from parameter TOML, with no players yet.
//
// # Safety
// `params_toml` must be NUL-terminated and `session` writable.
enum CdnStatus cdn_rating_session_new(const char *params_toml, struct CdnRatingSession **session);

// # Safety
// `session` must come from [`cdn_rating_session_new`] or be null.
void cdn_rating_session_free(struct CdnRatingSession *session);

// Learns from one finished game given as a JSON match record.
//
// # Safety
// `session` must be a live handle and `match_json` NUL-terminated.
enum CdnStatus cdn_rating_session_observe(struct CdnRatingSession *session, const char *match_json);

// Predicted team ordering, best first, for a JSON match record whose ranks
// are ignored. `team_count` always receives the number of teams; when it
// exceeds `capacity` the call returns `BufferTooSmall`.
//
// # Safety
// `session` must be a live handle, `match_json` NUL-terminated,
// `ordering` valid for `capacity` writes and `team_count` writable.
enum CdnStatus cdn_rating_session_predict(const struct CdnRatingSession *session,
                                          const char *match_json,
                                          uintptr_t *ordering,
                                          uintptr_t capacity,
                                          uintptr_t *team_count);

// Modal performance of a player's skill; unseen players get the prior's.
//
// # Safety
// `session` must be a live handle, `player` NUL-terminated and `mode`
// writable.
enum CdnStatus cdn_rating_session_skill_mode(const struct CdnRatingSession *session,
                                             const char *player,
                                             double *mode);

// Number of players with a learned skill.
//
// # Safety
// `session` must be a live handle and `count` writable.
enum CdnStatus cdn_rating_session_player_count(const struct CdnRatingSession *session,
                                               uintptr_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDN_H */
