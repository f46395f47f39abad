#ifndef SCLTL_PLANNER_H
#define SCLTL_PLANNER_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call.
 */
typedef enum {
  SCLP_STATUS_OK = 0,
  /**
   * A required pointer was null or an argument was out of range.
   */
  SCLP_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The formula text did not parse.
   */
  SCLP_STATUS_FORMULA_ERROR = 2,
  /**
   * The map or scenario JSON failed validation.
   */
  SCLP_STATUS_SCHEMA_ERROR = 3,
  /**
   * Automaton compilation failed (state cap exceeded).
   */
  SCLP_STATUS_COMPILE_ERROR = 4,
  /**
   * Value iteration failed to converge.
   */
  SCLP_STATUS_PLAN_ERROR = 5,
  /**
   * The task is not satisfiable under the current belief (a trace or plan
   * JSON is still written when one exists).
   */
  SCLP_STATUS_INFEASIBLE = 6,
  /**
   * The episode hit its step cap before acceptance (trace still written).
   */
  SCLP_STATUS_STEP_CAP_EXCEEDED = 7,
  /**
   * The episode failed for another reason.
   */
  SCLP_STATUS_EXEC_ERROR = 8,
  /**
   * An internal panic was caught.
   */
  SCLP_STATUS_PANIC = 9,
} SclpStatus;

/**
 * A loaded map plus compiled task, reusable across plans and runs.
 */
typedef struct SclpSession SclpSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sclp_last_error_message(void);

/**
 * Library version as a static string; do not free.
 */
const char *sclp_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned through an out-parameter of this
 * library, or null.
 */
void sclp_string_free(char *s);

/**
 * Compiles a formula over a comma-separated alphabet and writes the
 * automaton as JSON to `out_json`.
 *
 * # Safety
 * `formula` and `alphabet_csv` must be valid NUL-terminated strings and
 * `out_json` a valid pointer.
 */
SclpStatus sclp_compile(const char *formula, const char *alphabet_csv, char **out_json);

/**
 * Creates a session from map JSON and a formula over the map's alphabet.
 * Pass non-finite values to use the defaults (gamma 0.99, beta 1, eps 0.01).
 *
 * # Safety
 * `map_json` and `formula` must be valid NUL-terminated strings; `out` must
 * be a valid pointer. The returned session must be released with
 * [`sclp_session_free`].
 */
SclpStatus sclp_session_new(const char *map_json,
                            const char *formula,
                            double gamma,
                            double beta,
                            double epsilon,
                            SclpSession **out);

/**
 * Releases a session.
 *
 * # Safety
 * `session` must have come from [`sclp_session_new`] (or be null) and must
 * not be used afterwards.
 */
void sclp_session_free(SclpSession *session);

/**
 * Runs value iteration on the session's product and writes the plan JSON
 * (values, policy, satisfiability, sweeps) to `out_json`. Returns
 * `Infeasible` when no satisfying policy exists from the start state; the
 * JSON is still written in that case.
 *
 * # Safety
 * `session` must be a live session pointer and `out_json` valid.
 */
SclpStatus sclp_session_plan(SclpSession *session, char **out_json);

/**
 * Executes one episode and writes the trace JSON to `out_json`.
 *
 * `replan`: 0 trigger, 1 every step, 2 never. `h` is the sensor range.
 * `step_cap` of 0 uses the default (four times the product size). When the
 * map has no ground truth, a world is sampled from the belief with `seed`
 * (`has_seed` must then be true). Returns `Infeasible` or `StepCapExceeded`
 * for failed episodes; the trace JSON is still written.
 *
 * # Safety
 * `session` must be a live session pointer and `out_json` valid.
 */
SclpStatus sclp_session_run(SclpSession *session,
                            int32_t replan,
                            uint32_t h,
                            uintptr_t step_cap,
                            uint64_t seed,
                            bool has_seed,
                            char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SCLTL_PLANNER_H */
