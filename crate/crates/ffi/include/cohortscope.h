#ifndef COHORTSCOPE_H
#define COHORTSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_ARGUMENT = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_NOT_FOUND = 3,
  CS_STATUS_INVALID_QUERY = 4,
  CS_STATUS_INVALID_ARGUMENT = 5,
  CS_STATUS_IO = 6,
  CS_STATUS_INTERNAL = 7,
} CsStatus;

// Opaque patient store.
typedef struct CsStore CsStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *cs_last_error(void);

// Loads a dataset directory.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a writable pointer.
enum CsStatus cs_store_load(const char *dir, struct CsStore **out);

// Builds a seeded synthetic store of `n_patients`.
//
// # Safety
// `out` must be a writable pointer.
enum CsStatus cs_store_synthesize(size_t n_patients, uint64_t seed, struct CsStore **out);

// Releases a store. Null is ignored.
//
// # Safety
// `store` must come from this library and not be used afterwards.
void cs_store_free(struct CsStore *store);

// Number of patients, or 0 for a null store.
//
// # Safety
// `store` must be null or a live handle.
size_t cs_store_len(const struct CsStore *store);

// Evaluates a query; writes `{"count":n,"uids":[...]}`.
//
// # Safety
// `store` must be live, `dsl` NUL-terminated and `out_json` writable.
enum CsStatus cs_query(const struct CsStore *store, const char *dsl, char **out_json);

// Folded matrix for the cohort selected by `dsl`. `bp_type` may be null
// for systolic pressure.
//
// # Safety
// `store` must be live, strings NUL-terminated and `out_json` writable.
enum CsStatus cs_matrix(const struct CsStore *store,
                        const char *dsl,
                        double cycle_hours,
                        const char *bp_type,
                        char **out_json);

// Slice-and-wrap geometry of one patient.
//
// # Safety
// `store` must be live, `uid` NUL-terminated and `out_json` writable.
enum CsStatus cs_wrap(const struct CsStore *store,
                      const char *uid,
                      double cycle_hours,
                      char **out_json);

// Systolic baseline bars of one patient. Pass NaN as `baseline_high` for a
// single threshold.
//
// # Safety
// `store` must be live, `uid` NUL-terminated and `out_json` writable.
enum CsStatus cs_bars(const struct CsStore *store,
                      const char *uid,
                      double baseline_low,
                      double baseline_high,
                      char **out_json);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHORTSCOPE_H */
