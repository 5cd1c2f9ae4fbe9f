#ifndef CASTSIM_H
#define CASTSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum CastsimStatus {
  CASTSIM_STATUS_OK = 0,
  CASTSIM_STATUS_NULL_POINTER = 1,
  CASTSIM_STATUS_INVALID_UTF8 = 2,
  CASTSIM_STATUS_CONFIG = 3,
  CASTSIM_STATUS_PARSE = 4,
  CASTSIM_STATUS_SIMULATION = 5,
  CASTSIM_STATUS_IO = 6,
  CASTSIM_STATUS_OUT_OF_RANGE = 7,
  CASTSIM_STATUS_PANIC = 8,
} CastsimStatus;

/**
 * States of one learner rollout.
 */
typedef struct CastsimRollout CastsimRollout;

/**
 * A validated scenario.
 */
typedef struct CastsimScenario CastsimScenario;

/**
 * A finished trial with its log and artifact data.
 */
typedef struct CastsimTrial CastsimTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from this thread.
 */
const char *castsim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *castsim_version(void);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CastsimStatus castsim_scenario_from_json(const char *json, struct CastsimScenario **out);

/**
 * Overrides the scenario seed.
 *
 * # Safety
 * `scenario` must be a live handle or null.
 */
enum CastsimStatus castsim_scenario_set_seed(struct CastsimScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must be a live handle or null.
 */
void castsim_scenario_free(struct CastsimScenario *scenario);

/**
 * Runs the closed loop. A trial that ends without success still returns
 * `CASTSIM_STATUS_OK`; query [`castsim_trial_success`].
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum CastsimStatus castsim_run_trial(const struct CastsimScenario *scenario,
                                     struct CastsimTrial **out);

/**
 * 1 if the trial succeeded, 0 otherwise (also for null).
 *
 * # Safety
 * `trial` must be a live handle or null.
 */
int32_t castsim_trial_success(const struct CastsimTrial *trial);

/**
 * Number of iterations used (0 for null).
 *
 * # Safety
 * `trial` must be a live handle or null.
 */
size_t castsim_trial_iterations(const struct CastsimTrial *trial);

/**
 * The trial log as JSON, borrowed from the handle.
 *
 * # Safety
 * `trial` must be a live handle or null. The pointer dies with the handle.
 */
const char *castsim_trial_log_json(const struct CastsimTrial *trial);

/**
 * Writes the trial's artifacts (log, frames, CSV, SVG) under `dir`.
 *
 * # Safety
 * Handles must be live; `dir` must be a NUL-terminated path.
 */
enum CastsimStatus castsim_trial_write(const struct CastsimTrial *trial,
                                       const struct CastsimScenario *scenario,
                                       const char *dir);

/**
 * # Safety
 * `trial` must be a live handle or null.
 */
void castsim_trial_free(struct CastsimTrial *trial);

/**
 * Accelerations of an `n`-point string.
 *
 * `params` holds k_s, c_s, k_h, c_h, c_c1, c_c2, k_ph, c_ph. `positions`,
 * `velocities` and `out` hold `2 n` doubles (x, y interleaved). `hand`
 * holds x, y, orientation, vx, vy, angular velocity.
 *
 * # Safety
 * All pointers must reference arrays of the stated lengths.
 */
enum CastsimStatus castsim_net_accelerations(const double *params,
                                             size_t n,
                                             double total_length,
                                             const double *positions,
                                             const double *velocities,
                                             const double *hand,
                                             double *out);

/**
 * Rolls an `n`-point string out along a motion plan (JSON, as in scenario
 * logs) with the default arm, from the hanging state.
 *
 * # Safety
 * `params` must hold 8 doubles; `plan_json` must be NUL-terminated; `out`
 * must be writable.
 */
enum CastsimStatus castsim_rollout_new(const double *params,
                                       size_t n,
                                       double total_length,
                                       const char *plan_json,
                                       struct CastsimRollout **out);

/**
 * Number of recorded states (0 for null).
 *
 * # Safety
 * `rollout` must be a live handle or null.
 */
size_t castsim_rollout_len(const struct CastsimRollout *rollout);

/**
 * Time and tip position of state `index`.
 *
 * # Safety
 * `rollout` must be a live handle; output pointers must be writable.
 */
enum CastsimStatus castsim_rollout_tip(const struct CastsimRollout *rollout,
                                       size_t index,
                                       double *t,
                                       double *x,
                                       double *y);

/**
 * # Safety
 * `rollout` must be a live handle or null.
 */
void castsim_rollout_free(struct CastsimRollout *rollout);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASTSIM_H */
