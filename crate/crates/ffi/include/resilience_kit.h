#ifndef RESILIENCE_KIT_H
#define RESILIENCE_KIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every entry point.
typedef enum RkStatus {
  RK_STATUS_OK = 0,
  RK_STATUS_NULL_POINTER = 1,
  RK_STATUS_INVALID_ARGUMENT = 2,
  RK_STATUS_NUMERICAL = 3,
  // A hypothesis of the analysis does not hold (for example Z is empty).
  RK_STATUS_HYPOTHESIS = 4,
  RK_STATUS_CAPACITY = 5,
  RK_STATUS_PANIC = 6,
} RkStatus;

// Opaque linear system handle.
typedef struct RkSystem RkSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a system from row-major `A` (`n × n`) and `B_bar` (`n × k`).
//
// # Safety
// `a` must point to `n*n` doubles, `b_bar` to `n*k` doubles, `out` to a
// writable handle slot.
enum RkStatus rk_system_new(size_t n,
                            size_t k,
                            const double *a,
                            const double *b_bar,
                            struct RkSystem **out);

// Loads a built-in scenario by name.
//
// # Safety
// `name` must be a NUL-terminated string, `out` a writable handle slot.
enum RkStatus rk_system_from_scenario(const char *name, struct RkSystem **out);

// Parses a system description in the scenario JSON format.
//
// # Safety
// `json` must be a NUL-terminated string, `out` a writable handle slot.
enum RkStatus rk_system_from_json(const char *json, struct RkSystem **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `sys` must come from one of the constructors and not be freed twice.
void rk_system_free(struct RkSystem *sys);

// Writes the state and actuator counts.
//
// # Safety
// `sys` must be a live handle; `n` and `k` writable.
enum RkStatus rk_system_dims(const struct RkSystem *sys, size_t *n, size_t *k);

// Resilience verdict for the given lost actuators (0-based indices) as JSON.
//
// # Safety
// `lost` must point to `lost_len` indices; `out_json` must be writable.
enum RkStatus rk_check(const struct RkSystem *sys,
                       const size_t *lost,
                       size_t lost_len,
                       char **out_json);

// Reach tube from `x0` (length `n`) over `horizon` seconds in `steps` steps, as JSON.
//
// # Safety
// Pointers as in `rk_check`; `x0` must point to `n` doubles.
enum RkStatus rk_reach(const struct RkSystem *sys,
                       const size_t *lost,
                       size_t lost_len,
                       const double *x0,
                       double horizon,
                       size_t steps,
                       char **out_json);

// Reach-time and quantitative-resilience bounds at `x0`, as JSON.
//
// # Safety
// Pointers as in `rk_reach`.
enum RkStatus rk_bounds(const struct RkSystem *sys,
                        const size_t *lost,
                        size_t lost_len,
                        const double *x0,
                        size_t samples,
                        uint64_t seed,
                        char **out_json);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void rk_string_free(char *s);

// Message for the most recent failure on this thread; empty after a
// success. Valid until the next call on the same thread.
const char *rk_last_error_message(void);

// Library version, NUL-terminated and static.
const char *rk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESILIENCE_KIT_H */
