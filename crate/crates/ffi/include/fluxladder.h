#ifndef FLUXLADDER_H
#define FLUXLADDER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FlxStatus {
  FLX_STATUS_OK = 0,
  FLX_STATUS_INVALID_ARGUMENT = 1,
  FLX_STATUS_CAPACITY = 2,
  FLX_STATUS_CONVERGENCE = 3,
  FLX_STATUS_CONSISTENCY = 4,
  FLX_STATUS_INSTABILITY = 5,
  FLX_STATUS_LINEAR_ALGEBRA = 6,
  FLX_STATUS_IO = 7,
  FLX_STATUS_NULL_POINTER = 8,
  FLX_STATUS_NOT_SOLVED = 9,
  FLX_STATUS_BUFFER_TOO_SMALL = 10,
  FLX_STATUS_PANIC = 11,
} FlxStatus;

typedef enum FlxMethod {
  FLX_METHOD_AUTO = 0,
  FLX_METHOD_DIRECT_DENSE = 1,
  FLX_METHOD_ITERATIVE_LINEAR = 2,
  FLX_METHOD_TIME_EVOLUTION = 3,
} FlxMethod;

/**
 * Opaque solver state.
 */
typedef struct FlxSolver FlxSolver;

/**
 * Ladder geometry; energies in units of the leg hopping.
 */
typedef struct FlxLadder {
  size_t rungs;
  double k_over_j;
  double phi;
} FlxLadder;

typedef struct FlxDrive {
  double gamma_over_j;
  double nbar1;
  double nbar_l;
} FlxDrive;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Engine version, a static NUL-terminated string.
 */
const char *flx_version(void);

/**
 * Message of the last failed call on this thread (empty if none). Valid
 * until the next failing call on the same thread.
 */
const char *flx_last_error(void);

/**
 * Creates a solver with default settings (auto method, tolerance 1e-10).
 *
 * # Safety
 * `ladder` and `drive` must point to valid structs, `out` to writable storage.
 */
enum FlxStatus flx_solver_new(const struct FlxLadder *ladder,
                              const struct FlxDrive *drive,
                              struct FlxSolver **out);

/**
 * Releases a solver; null is ignored.
 *
 * # Safety
 * `h` must come from [`flx_solver_new`] and not be used afterwards.
 */
void flx_solver_free(struct FlxSolver *h);

/**
 * `method` is one of the `FlxMethod` values.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum FlxStatus flx_solver_set_method(struct FlxSolver *h, uint32_t method);

/**
 * # Safety
 * `h` must be a live handle.
 */
enum FlxStatus flx_solver_set_tolerance(struct FlxSolver *h, double tolerance);

/**
 * Computes the steady state and its observables.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum FlxStatus flx_solver_solve(struct FlxSolver *h);

/**
 * Total and chiral current of the last solve.
 *
 * # Safety
 * `h` must be a live handle; outputs may be null to skip them.
 */
enum FlxStatus flx_solver_currents(const struct FlxSolver *h, double *total, double *chiral);

/**
 * Residual `Σ_N ||L(ρ)^N||₁` of the last solve.
 *
 * # Safety
 * `h` must be a live handle, `out` writable.
 */
enum FlxStatus flx_solver_residual(const struct FlxSolver *h, double *out);

/**
 * Densities `⟨n_{j,p}⟩` in flat order `2(j-1) + (p-1)`; `2L` values.
 *
 * # Safety
 * `h` live; `out` holds `len` doubles; `needed` null or writable.
 */
enum FlxStatus flx_solver_densities(const struct FlxSolver *h,
                                    double *out,
                                    size_t len,
                                    size_t *needed);

/**
 * Sector currents `J_N`, `N = 0..=2L`, at the centre bond.
 *
 * # Safety
 * As [`flx_solver_densities`].
 */
enum FlxStatus flx_solver_sector_currents(const struct FlxSolver *h,
                                          double *out,
                                          size_t len,
                                          size_t *needed);

/**
 * Block weights `tr ρ^N`, `N = 0..=2L`.
 *
 * # Safety
 * As [`flx_solver_densities`].
 */
enum FlxStatus flx_solver_block_weights(const struct FlxSolver *h,
                                        double *out,
                                        size_t len,
                                        size_t *needed);

/**
 * Full report as NUL-terminated JSON. `*needed` receives the size
 * including the terminator.
 *
 * # Safety
 * `h` live; `out` holds `len` bytes; `needed` null or writable.
 */
enum FlxStatus flx_solver_report_json(const struct FlxSolver *h,
                                      char *out,
                                      size_t len,
                                      size_t *needed);

/**
 * Ascending eigenvalues (units of J) of the sector Hamiltonian `H_N`.
 *
 * # Safety
 * `ladder` valid; `out` holds `len` doubles; `needed` null or writable.
 */
enum FlxStatus flx_sector_spectrum(const struct FlxLadder *ladder,
                                   size_t particles,
                                   double *out,
                                   size_t len,
                                   size_t *needed);

/**
 * Total and chiral current of the free-boson reference.
 *
 * # Safety
 * `ladder`, `drive` valid; outputs may be null to skip them.
 */
enum FlxStatus flx_free_currents(const struct FlxLadder *ladder,
                                 const struct FlxDrive *drive,
                                 double *total,
                                 double *chiral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLUXLADDER_H */
