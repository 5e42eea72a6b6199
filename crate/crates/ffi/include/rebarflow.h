/* C interface of the rebarflow two-scale flow solver. */

#ifndef REBARFLOW_H
#define REBARFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define REBARFLOW_OK 0

#define REBARFLOW_ERR_CONFIG 1

#define REBARFLOW_ERR_MESH 2

#define REBARFLOW_ERR_SOLVER 3

#define REBARFLOW_ERR_IO 4

#define REBARFLOW_ERR_ARGUMENT -1

#define REBARFLOW_ERR_PANIC -2

/**
 * Opaque solved-scenario handle.
 */
typedef struct RebarflowSolution RebarflowSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated, truncated to `cap`)
 * into `buf`; returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null.
 */
uintptr_t rebarflow_last_error(char *buf, uintptr_t cap);

/**
 * Solves the scenario described by the config file at `config_path` and
 * writes its configured outputs. On success `*out` owns the solution.
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string; `out` must be a
 * valid pointer.
 */
int32_t rebarflow_run(const char *config_path, struct RebarflowSolution **out);

/**
 * Releases a solution handle. Null is a no-op.
 *
 * # Safety
 * `sol` must be a pointer previously returned by [`rebarflow_run`], not
 * yet freed.
 */
void rebarflow_solution_free(struct RebarflowSolution *sol);

/**
 * Number of Newton iterations of the solve.
 *
 * # Safety
 * `sol` must be a valid solution handle.
 */
uintptr_t rebarflow_solution_iterations(const struct RebarflowSolution *sol);

/**
 * Final residual norm of the solve.
 *
 * # Safety
 * `sol` must be a valid solution handle.
 */
double rebarflow_solution_residual(const struct RebarflowSolution *sol);

/**
 * Samples velocity and pressure at `(x, y)`; fills `out[3] = {u_x, u_y,
 * p}`. Returns 0 on success, 1 when the point is outside the mesh (e.g.
 * inside an obstacle).
 *
 * # Safety
 * `sol` must be a valid solution handle and `out` must point to at least
 * 3 writable doubles.
 */
int32_t rebarflow_solution_sample(const struct RebarflowSolution *sol,
                                  double x,
                                  double y,
                                  double *out);

/**
 * Net volumetric flux through the outer boundary (a mass-balance check;
 * near zero at convergence).
 *
 * # Safety
 * `sol` must be a valid solution handle.
 */
double rebarflow_solution_net_flux(const struct RebarflowSolution *sol);

/**
 * Newtonian unit-cell permeability for an obstacle of radius `xi`
 * (0 < xi < 0.5) at viscosity `mu`, on a cell mesh of resolution `h`.
 * Fills `out_k[4]` row-major.
 *
 * # Safety
 * `out_k` must point to at least 4 writable doubles.
 */
int32_t rebarflow_rve_permeability(double xi, double h, double mu, double *out_k);

/**
 * Beavers-Joseph-Saffman slip coefficient from the boundary-layer cell
 * problem for a Newtonian fluid of viscosity `mu`.
 *
 * # Safety
 * `out_beta` must point to a writable double.
 */
int32_t rebarflow_boundary_layer_beta(double xi,
                                      uintptr_t free_cells,
                                      double h,
                                      double mu,
                                      double *out_beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REBARFLOW_H */
