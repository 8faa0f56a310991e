#ifndef SMPM_SCHUR_H
#define SMPM_SCHUR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum SmpmStatus {
  SMPM_STATUS_OK = 0,
  SMPM_STATUS_NULL_POINTER = 1,
  SMPM_STATUS_INVALID_ARGUMENT = 2,
  SMPM_STATUS_DIMENSION_MISMATCH = 3,
  SMPM_STATUS_ASSEMBLY_FAILURE = 4,
  SMPM_STATUS_PRECONDITIONER_FAILURE = 5,
  SMPM_STATUS_RANK_DEFICIENCY = 6,
  SMPM_STATUS_SIZE_LIMIT = 7,
  SMPM_STATUS_FACTORIZATION = 8,
  // GMRES hit its iteration cap; outputs hold the last iterate.
  SMPM_STATUS_NOT_CONVERGED = 9,
  SMPM_STATUS_INTERNAL = 10,
  SMPM_STATUS_PANIC = 11,
} SmpmStatus;

// Schur solver variant.
typedef enum SmpmMode {
  SMPM_MODE_PLAIN = 0,
  SMPM_MODE_JACOBI = 1,
  SMPM_MODE_DEFLATED = 2,
  SMPM_MODE_JACOBI_DEFLATED = 3,
} SmpmMode;

// Opaque solver handle.
typedef struct SmpmSolver SmpmSolver;

// Statistics of one solve.
typedef struct SmpmStats {
  size_t iterations;
  bool converged;
  // Last relative GMRES residual.
  double final_residual;
  double setup_seconds;
  double solve_seconds;
} SmpmStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a solver for an `mx × my` grid of `n × n`-node elements on
// `[0, lx] × [0, ly]`. A non-positive or non-finite `tau` selects the
// default penalty. On success `*out` receives a handle to release with
// [`smpm_solver_free`].
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum SmpmStatus smpm_solver_new(size_t n,
                                size_t mx,
                                size_t my,
                                double lx,
                                double ly,
                                double tau,
                                struct SmpmSolver **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `handle` must be null or a handle from [`smpm_solver_new`] not yet freed.
void smpm_solver_free(struct SmpmSolver *handle);

// Total grid nodes `r`, or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
size_t smpm_solver_num_nodes(const struct SmpmSolver *handle);

// Interface unknowns `k`, or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
size_t smpm_solver_num_interface_nodes(const struct SmpmSolver *handle);

// Interface pairs `d` (deflation vectors), or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
size_t smpm_solver_num_pairs(const struct SmpmSolver *handle);

// Penalty in use, or NaN for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
double smpm_solver_tau(const struct SmpmSolver *handle);

// Writes node coordinates into `x` and `y`, each of length `len = r`.
//
// # Safety
// `x` and `y` must point to `len` writable doubles.
enum SmpmStatus smpm_solver_coordinates(const struct SmpmSolver *handle,
                                        double *x,
                                        double *y,
                                        size_t len);

// Samples the manufactured problem `∇²u = cos(λπx/Lx) cos(λπy/Ly)`,
// `∂u/∂n = 0`: writes `f` and, if `u_exact` is non-null, the exact
// solution. Buffers have length `len = r`.
//
// # Safety
// `f` must point to `len` writable doubles; `u_exact` likewise or be null.
enum SmpmStatus smpm_manufactured_rhs(const struct SmpmSolver *handle,
                                      uint32_t lambda,
                                      double *f,
                                      double *u_exact,
                                      size_t len);

// Solves `∇²u = f`, `∂u/∂n = g` and writes the zero-mean solution to
// `u_out`. `g` may be null for homogeneous data; otherwise it holds, at each
// boundary node, the Neumann data summed over the physical sides through
// it. All buffers have length `len = r`. `tol <= 0` selects 1e-10.
// Returns `SMPM_STATUS_NOT_CONVERGED` with the last iterate written when
// GMRES stops early. `stats` may be null.
//
// # Safety
// `f` and `u_out` must point to `len` doubles (`u_out` writable); `g` must
// be null or point to `len` doubles; `stats` must be null or writable.
enum SmpmStatus smpm_solver_solve(const struct SmpmSolver *handle,
                                  const double *f,
                                  const double *g,
                                  size_t len,
                                  enum SmpmMode mode,
                                  double tol,
                                  double *u_out,
                                  struct SmpmStats *stats);

// Message for the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *smpm_last_error_message(void);

// Static description of a status code.
const char *smpm_status_string(enum SmpmStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMPM_SCHUR_H */
