/* C interface to the dispersive-rbffd solver. */

#ifndef DISPERSIVE_RBFFD_H
#define DISPERSIVE_RBFFD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this interface.
 */
typedef enum DrbffdStatus {
  DRBFFD_STATUS_OK = 0,
  /**
   * Numerical failure (singular system, blow-up, non-finite state, ...).
   */
  DRBFFD_STATUS_NUMERICAL = 1,
  /**
   * Invalid configuration or argument values.
   */
  DRBFFD_STATUS_CONFIG = 2,
  DRBFFD_STATUS_NULL_POINTER = 3,
  DRBFFD_STATUS_INVALID_UTF8 = 4,
  DRBFFD_STATUS_IO = 5,
  /**
   * A panic was caught at the boundary; state may be inconsistent.
   */
  DRBFFD_STATUS_INTERNAL = 6,
} DrbffdStatus;

/**
 * Opaque simulation handle: a discretized problem plus its current state.
 */
typedef struct DrbffdSim DrbffdSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread (empty string if none).
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *drbffd_last_error(void);

/**
 * Build a simulation from a JSON run configuration (same schema the CLI
 * accepts) and store the handle in `*out`. The initial state is the exact
 * solitary wave when the config carries one, otherwise rest, with the
 * boundary values applied at t = 0.
 */
enum DrbffdStatus drbffd_sim_new(const char *config_json, struct DrbffdSim **out);

/**
 * Advance the simulation by `n_steps` RK4 steps of the configured dt.
 */
enum DrbffdStatus drbffd_sim_step(struct DrbffdSim *sim, uint64_t n_steps);

/**
 * Current simulation time (steps taken times dt); NaN for a null handle.
 */
double drbffd_sim_time(const struct DrbffdSim *sim);

/**
 * Number of spatial nodes; 0 for a null handle.
 */
size_t drbffd_sim_node_count(const struct DrbffdSim *sim);

/**
 * Copy the node coordinates into `buf` (must hold exactly `len` doubles,
 * with `len` equal to the node count).
 */
enum DrbffdStatus drbffd_sim_nodes(const struct DrbffdSim *sim, double *buf, size_t len);

/**
 * Copy the current solution values into `buf` (same length contract as
 * `drbffd_sim_nodes`).
 */
enum DrbffdStatus drbffd_sim_state(const struct DrbffdSim *sim, double *buf, size_t len);

/**
 * Release a handle created by `drbffd_sim_new`. Null is a no-op.
 */
void drbffd_sim_free(struct DrbffdSim *sim);

/**
 * Run a full experiment from a JSON configuration and write its output
 * files (CSV/JSON, plus operator dumps when requested) under `out_dir`.
 * `name` labels the run in meta.json; null means "run".
 */
enum DrbffdStatus drbffd_run_to_dir(const char *name,
                                    const char *config_json,
                                    const char *out_dir,
                                    bool dump_operators);

/**
 * Evaluate the closed-form solitary wave for the classic third-order model
 * at (x, t) and store it in `*out`.
 */
enum DrbffdStatus drbffd_soliton_exact(double speed_c,
                                       double beta,
                                       double gamma_disp,
                                       double x,
                                       double t,
                                       double *out);

/**
 * The built-in left-boundary forcing g(t) = sin(20 pi t) tanh(5 t).
 */
double drbffd_forcing_sin_tanh(double t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISPERSIVE_RBFFD_H */
