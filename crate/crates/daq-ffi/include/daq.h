#ifndef DAQ_H
#define DAQ_H

/* Generated by cbindgen from the daq-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DaqStatus {
  DAQ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DAQ_STATUS_NULL_POINTER = 1,
  /**
   * A value failed validation; `daq_last_error` has the detail.
   */
  DAQ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An iterative solver hit its iteration cap.
   */
  DAQ_STATUS_NO_CONVERGENCE = 3,
  /**
   * Reading or writing a file failed.
   */
  DAQ_STATUS_IO_ERROR = 4,
  /**
   * An internal invariant broke; `daq_last_error` has the detail.
   */
  DAQ_STATUS_PANIC = 5,
} DaqStatus;

/**
 * Opaque environment handle.
 */
typedef struct DaqEnv DaqEnv;

/**
 * Inputs to the finite-time bound. `d_min`/`d_max` are the extremes of the
 * behavior distribution over state-action pairs; with `synchronized` = 0 the
 * calculator divides them by `n_estimators` for the per-estimator draw.
 */
typedef struct DaqBoundInputs {
  double alpha;
  double gamma;
  size_t n_estimators;
  size_t size_sa;
  double d_min;
  double d_max;
  uint64_t t;
} DaqBoundInputs;

/**
 * Description of the most recent failure on this thread; empty after a
 * success. The pointer stays valid until the next call on the same thread.
 */
const char *daq_last_error(void);

/**
 * Static description of a status code.
 */
const char *daq_status_message(enum DaqStatus status);

/**
 * Creates the 3x3 grid task. `noisy_goal` 0 gives noisy step rewards and a
 * fixed goal reward; nonzero gives fixed step rewards and a noisy goal.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum DaqStatus daq_env_grid(int noisy_goal, struct DaqEnv **out);

/**
 * Creates the two-state chain with `k` noisy terminal actions of mean `mu`.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum DaqStatus daq_env_sutton(size_t k, double mu, struct DaqEnv **out);

/**
 * Creates the hub chain with `m` looping inner states.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum DaqStatus daq_env_weng(size_t m, struct DaqEnv **out);

/**
 * Releases an environment handle; a null handle is ignored.
 *
 * # Safety
 * `env` must be null or a handle from a `daq_env_*` constructor that has not
 * been freed yet; it is invalid after this call.
 */
void daq_env_free(struct DaqEnv *env);

/**
 * Number of states, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle from a `daq_env_*` constructor.
 */
size_t daq_env_n_states(const struct DaqEnv *env);

/**
 * Largest per-state action count, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle from a `daq_env_*` constructor.
 */
size_t daq_env_max_actions(const struct DaqEnv *env);

/**
 * Valid actions at `state`, or 0 for a null handle or an out-of-range state.
 *
 * # Safety
 * `env` must be null or a live handle from a `daq_env_*` constructor.
 */
size_t daq_env_n_actions(const struct DaqEnv *env, size_t state);

/**
 * Conventional discount of the task, or NaN for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle from a `daq_env_*` constructor.
 */
double daq_env_default_gamma(const struct DaqEnv *env);

/**
 * Solves the environment's expected model by value iteration with a uniform
 * reward shift. Writes `n_states * max_actions` action values (row-major,
 * padding entries of invalid actions are 0) into `out_q`, which must hold at
 * least that many elements. `out_iterations` and `out_residual` are optional.
 *
 * # Safety
 * `env` must be null or a live handle; `out_q` must be null or valid for
 * writing `out_q_len` doubles; the optional outputs must each be null or
 * valid for one write.
 */
enum DaqStatus daq_oracle_q(const struct DaqEnv *env,
                            double shift,
                            double tol,
                            uint64_t max_iter,
                            double *out_q,
                            size_t out_q_len,
                            uint64_t *out_iterations,
                            double *out_residual);

/**
 * Evaluates the finite-time error bound. Each output pointer is optional.
 *
 * # Safety
 * `inputs` must be null or point to a readable `DaqBoundInputs`; the output
 * pointers must each be null or valid for one write.
 */
enum DaqStatus daq_finite_time_bound(const struct DaqBoundInputs *inputs,
                                     int synchronized,
                                     double *out_term1,
                                     double *out_term2,
                                     double *out_term3,
                                     double *out_total);

/**
 * Replays an asynchronous shifted ensemble against its two-player twin from
 * one seed and reports the largest table deviation (0 means bit-identical).
 * `min_of_max` 0 uses the max-of-min bootstrap, nonzero the min-of-max.
 * `shifts` supplies one reward shift per estimator.
 *
 * # Safety
 * `env` must be null or a live handle; `shifts` must be null or valid for
 * reading `n_shifts` doubles; `out_max_deviation` must be null or valid for
 * one write.
 */
enum DaqStatus daq_equiv_check(const struct DaqEnv *env,
                               int min_of_max,
                               const double *shifts,
                               size_t n_shifts,
                               size_t steps,
                               uint64_t seed,
                               double alpha,
                               double epsilon,
                               double gamma,
                               double *out_max_deviation);

/**
 * Runs the experiment described by a flat key = value config file. A
 * non-null `out_prefix` overrides the config's output prefix, and the curve
 * CSV files are written under it. `out_episodes`/`out_runs` are optional.
 *
 * # Safety
 * `config_path` and `out_prefix` must be null or NUL-terminated strings;
 * the optional outputs must each be null or valid for one write.
 */
enum DaqStatus daq_run_experiment_file(const char *config_path,
                                       const char *out_prefix,
                                       uint64_t *out_episodes,
                                       uint64_t *out_runs);

#endif /* DAQ_H */
