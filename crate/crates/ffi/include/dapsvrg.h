#ifndef DAPSVRG_H
#define DAPSVRG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_DIMENSION_MISMATCH = 3,
  DS_STATUS_NON_FINITE = 4,
  DS_STATUS_NO_CONVERGENCE = 5,
  DS_STATUS_DIVERGED = 6,
  DS_STATUS_STALENESS_VIOLATION = 7,
  DS_STATUS_RATE_INAPPLICABLE = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  DS_STATUS_INTERNAL = 99,
} DsStatus;

typedef enum DsRegKind {
  DS_REG_KIND_NONE = 0,
  DS_REG_KIND_L1 = 1,
  DS_REG_KIND_SQUARED_L2 = 2,
  DS_REG_KIND_ELASTIC_NET = 3,
  DS_REG_KIND_NUCLEAR = 4,
} DsRegKind;

typedef enum DsAlgorithm {
  DS_ALGORITHM_TAP_SVRG = 0,
  DS_ALGORITHM_DAP_SVRG = 1,
  DS_ALGORITHM_DAP_SGD_CONST = 2,
  DS_ALGORITHM_DAP_SGD_DECAY = 3,
} DsAlgorithm;

/**
 * Opaque problem handle.
 */
typedef struct DsProblem DsProblem;

/**
 * Opaque handle to a finished simulated run.
 */
typedef struct DsRun DsRun;

/**
 * `weight` is the single weight, or the l1 part of the elastic net;
 * `l2_weight` is read by the elastic net only.
 */
typedef struct DsRegularizer {
  enum DsRegKind kind;
  double weight;
  double l2_weight;
} DsRegularizer;

typedef struct DsConstants {
  double smoothness;
  double strong_convexity;
  double sample_smoothness;
} DsConstants;

typedef struct DsCostModel {
  double grad_cost;
  double prox_cost;
  double add_cost;
  double net_cost;
} DsCostModel;

typedef struct DsRunConfig {
  enum DsAlgorithm algorithm;
  double eta;
  double beta;
  size_t stages;
  size_t inner_iters;
  size_t workers;
  uint64_t seed;
  struct DsCostModel cost;
} DsRunConfig;

typedef struct DsEpochRow {
  size_t stage;
  double epoch;
  uint64_t grad_evals;
  double sim_time;
  double objective;
  size_t max_staleness;
} DsEpochRow;

typedef struct DsConvergenceParams {
  double mu;
  double l;
  double eta;
  double tau;
  size_t m;
  double epsilon;
} DsConvergenceParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread; empty when none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ds_last_error_message(void);

/**
 * Builds a problem from `n` samples: `a` is `n x d1`, `b` is `n x d2`.
 *
 * # Safety
 * `a` and `b` must point to `n*d1` and `n*d2` doubles; `out` must be writable.
 */
enum DsStatus ds_problem_new(const double *a,
                             const double *b,
                             size_t n,
                             size_t d1,
                             size_t d2,
                             double ridge,
                             struct DsRegularizer reg,
                             struct DsProblem **out);

/**
 * Synthetic low-rank instance `B = A X` with standard-normal factors.
 *
 * # Safety
 * `out` must be writable.
 */
enum DsStatus ds_problem_generate_lowrank(size_t d1,
                                          size_t d2,
                                          size_t rank,
                                          size_t n,
                                          uint64_t seed,
                                          double ridge,
                                          struct DsRegularizer reg,
                                          struct DsProblem **out);

/**
 * # Safety
 * `problem` must come from a `ds_problem_*` constructor, or be null.
 */
void ds_problem_free(struct DsProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; the out pointers must be writable.
 */
enum DsStatus ds_problem_shape(const struct DsProblem *problem, size_t *n, size_t *d1, size_t *d2);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum DsStatus ds_problem_constants(const struct DsProblem *problem, struct DsConstants *out);

/**
 * Objective value at the `d1 x d2` point `x` (`len = d1*d2`).
 *
 * # Safety
 * `x` must point to `len` doubles and `out` be writable.
 */
enum DsStatus ds_problem_objective(const struct DsProblem *problem,
                                   const double *x,
                                   size_t len,
                                   double *out);

/**
 * High-accuracy minimizer by full proximal gradient. Writes `x*` into
 * `x_out` (`len = d1*d2`) and `P(x*)` into `p_star`.
 *
 * # Safety
 * `x_out` must have room for `len` doubles and `p_star` be writable.
 */
enum DsStatus ds_solve_reference(const struct DsProblem *problem,
                                 double tol,
                                 size_t max_iters,
                                 double *x_out,
                                 size_t len,
                                 double *p_star);

/**
 * `out = Prox_{eta,h}(x)` for a `rows x cols` matrix; `out` may alias `x`.
 *
 * # Safety
 * `x` and `out` must each hold `rows*cols` doubles.
 */
enum DsStatus ds_prox(struct DsRegularizer reg,
                      const double *x,
                      size_t rows,
                      size_t cols,
                      double eta,
                      double *out);

/**
 * Fills `out` with the defaults used by the command-line tool:
 * `eta = 1/(8 L_max)`, `beta = 0.5`, 10 stages of `2n` inner steps, seed 0
 * and the default cost model.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum DsStatus ds_run_config_default(const struct DsProblem *problem,
                                    enum DsAlgorithm algorithm,
                                    size_t workers,
                                    struct DsRunConfig *out);

/**
 * Simulates one run; on success `*out` owns the record.
 *
 * # Safety
 * `problem` and `config` must be valid and `out` writable.
 */
enum DsStatus ds_run(const struct DsProblem *problem,
                     const struct DsRunConfig *config,
                     struct DsRun **out);

/**
 * # Safety
 * `run` must come from [`ds_run`], or be null.
 */
void ds_run_free(struct DsRun *run);

/**
 * Number of epoch rows: one before the first stage, then one per stage.
 * Returns 0 for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
size_t ds_run_row_count(const struct DsRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum DsStatus ds_run_row(const struct DsRun *run, size_t index, struct DsEpochRow *out);

/**
 * # Safety
 * `run` must be a live handle and `x_out` hold `len` doubles.
 */
enum DsStatus ds_run_final_iterate(const struct DsRun *run, double *x_out, size_t len);

/**
 * Largest staleness observed over the run; 0 for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
size_t ds_run_max_staleness(const struct DsRun *run);

/**
 * Per-stage contraction factor of the asynchronous rate bound.
 *
 * # Safety
 * `params` must be valid and `out` writable.
 */
enum DsStatus ds_theorem1_rho(const struct DsConvergenceParams *params, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAPSVRG_H */
