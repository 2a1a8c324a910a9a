#ifndef CQDAE_H
#define CQDAE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Time integrators.
 */
typedef enum CqMethod {
  CQ_METHOD_EULER = 0,
  CQ_METHOD_BDF2 = 1,
  CQ_METHOD_RADAU1 = 2,
  CQ_METHOD_RADAU2 = 3,
  CQ_METHOD_RADAU3 = 4,
} CqMethod;

typedef enum CqSolver {
  CQ_SOLVER_COUPLED = 0,
  CQ_SOLVER_REDUCED = 1,
} CqSolver;

typedef enum CqContour {
  CQ_CONTOUR_EXPERIMENT = 0,
  CQ_CONTOUR_CONSERVATIVE = 1,
} CqContour;

/**
 * Result codes.
 */
typedef enum CqStatus {
  CQ_STATUS_OK = 0,
  CQ_STATUS_NULL_POINTER = 1,
  CQ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input, configuration or weight-binding error.
   */
  CQ_STATUS_CONFIG = 3,
  /**
   * Numerical failure (singular pencil, Newton divergence, overflow).
   */
  CQ_STATUS_NUMERICAL = 4,
  CQ_STATUS_BUFFER_TOO_SMALL = 5,
  CQ_STATUS_PANIC = 6,
} CqStatus;

/**
 * Parsed circuit with its device.
 */
typedef struct CqCircuit CqCircuit;

/**
 * Simulation result.
 */
typedef struct CqTrajectory CqTrajectory;

/**
 * Precomputed convolution weights.
 */
typedef struct CqWeights CqWeights;

/**
 * Grid and discretization of a run.
 */
typedef struct CqRunOptions {
  enum CqMethod method;
  enum CqSolver solver;
  uintptr_t steps;
  double horizon;
  enum CqContour contour;
  /**
   * Tolerance of the conservative contour.
   */
  double eps;
  /**
   * Nonzero for naive convolution sums.
   */
  int naive_convolution;
} CqRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: implicit Euler, reduced solver, 100 steps on `[0, 1]`,
 * experiment contour.
 */
struct CqRunOptions cq_run_options_default(void);

/**
 * Parses a netlist. Relative device paths resolve against `base_dir`
 * (may be null for the working directory). `diode_offset` must be +1 or -1.
 *
 * # Safety
 * `netlist` and `base_dir` must be null or NUL-terminated strings; `out`
 * must be a valid pointer.
 */
enum CqStatus cq_circuit_from_netlist(const char *netlist,
                                      const char *base_dir,
                                      double diode_offset,
                                      struct CqCircuit **out);

/**
 * Number of unknowns of the circuit (node potentials and branch currents).
 *
 * # Safety
 * `circuit` must be null or a live handle.
 */
uintptr_t cq_circuit_dim(const struct CqCircuit *circuit);

/**
 * # Safety
 * `circuit` must be null or a handle not yet freed.
 */
void cq_circuit_free(struct CqCircuit *circuit);

/**
 * Offline stage: weights of the circuit's device for `opts`.
 *
 * # Safety
 * `circuit` and `opts` must be live; `out` must be a valid pointer.
 */
enum CqStatus cq_weights_compute(const struct CqCircuit *circuit,
                                 const struct CqRunOptions *opts,
                                 struct CqWeights **out);

/**
 * Number of weights in the table.
 *
 * # Safety
 * `weights` must be null or a live handle.
 */
uintptr_t cq_weights_len(const struct CqWeights *weights);

/**
 * # Safety
 * `weights` must be null or a handle not yet freed.
 */
void cq_weights_free(struct CqWeights *weights);

/**
 * Runs a simulation. `weights` may be null; it is only accepted by the
 * reduced solver and must match `opts`.
 *
 * # Safety
 * `circuit` and `opts` must be live, `weights` null or live, `out` valid.
 */
enum CqStatus cq_simulate(const struct CqCircuit *circuit,
                          const struct CqWeights *weights,
                          const struct CqRunOptions *opts,
                          struct CqTrajectory **out);

/**
 * Number of steps `N`; the trajectory holds `N + 1` time points.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
uintptr_t cq_trajectory_steps(const struct CqTrajectory *traj);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
uintptr_t cq_trajectory_dim(const struct CqTrajectory *traj);

/**
 * Copies the solution row-major (`(N + 1) × dim`) into `buf`.
 *
 * # Safety
 * `traj` must be live and `buf` must hold `len` doubles.
 */
enum CqStatus cq_trajectory_copy(const struct CqTrajectory *traj, double *buf, uintptr_t len);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void cq_trajectory_free(struct CqTrajectory *traj);

/**
 * Copies the last error message of this thread (NUL-terminated,
 * truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or hold `len` bytes.
 */
uintptr_t cq_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CQDAE_H */
