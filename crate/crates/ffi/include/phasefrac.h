#ifndef PHASEFRAC_H
#define PHASEFRAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_OK = 0,
  /**
   * The load program has no steps left.
   */
  PF_FINISHED = 1,
  PF_ERR_NULL_POINTER = 2,
  PF_ERR_INVALID_ARGUMENT = 3,
  PF_ERR_IO = 4,
  PF_ERR_CONFIG = 5,
  PF_ERR_MESH = 6,
  PF_ERR_SOLVER = 7,
  PF_ERR_BUFFER_TOO_SMALL = 8,
  PF_ERR_PANIC = 9,
} PfStatus;

/**
 * Opaque mesh handle.
 */
typedef struct PfMesh PfMesh;

/**
 * Opaque simulation handle.
 */
typedef struct PfSimulation PfSimulation;

typedef struct PfEnergies {
  double elastic;
  double dissipated;
  double total;
  double reaction;
} PfEnergies;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pf_last_error_message(char *buf, size_t len);

/**
 * Generates a square with an edge slit. `thickness <= 0` gives a 2D quad
 * mesh; `band_half_width <= 0` disables the refined band.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum PfStatus pf_mesh_generate_notched_square(double side,
                                              double notch_tip_x,
                                              double notch_y,
                                              double h,
                                              double thickness,
                                              size_t layers,
                                              double band_half_width,
                                              double band_h,
                                              struct PfMesh **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum PfStatus pf_mesh_load(const char *path, struct PfMesh **out);

/**
 * # Safety
 * `mesh` must be a live handle; `path` a NUL-terminated string.
 */
enum PfStatus pf_mesh_save(const struct PfMesh *mesh, const char *path);

/**
 * Writes node count, element count and spatial dimension; any output
 * pointer may be null.
 *
 * # Safety
 * `mesh` must be a live handle; non-null outputs must be writable.
 */
enum PfStatus pf_mesh_info(const struct PfMesh *mesh,
                           size_t *num_nodes,
                           size_t *num_elements,
                           size_t *dim);

/**
 * # Safety
 * `mesh` must be null or a handle not freed before.
 */
void pf_mesh_free(struct PfMesh *mesh);

/**
 * Builds a simulation from a TOML config, a preset name, or both (the file
 * is layered over the preset). Either may be null, not both.
 *
 * # Safety
 * Non-null strings must be NUL-terminated; `out` a valid handle slot.
 */
enum PfStatus pf_simulation_create(const char *config_path,
                                   const char *preset,
                                   struct PfSimulation **out);

/**
 * Runs the next load step. Returns `PF_FINISHED` when no steps remain.
 * `converged` (may be null) receives 1 if the step met both tolerances.
 *
 * # Safety
 * `sim` must be a live handle; `converged` null or writable.
 */
enum PfStatus pf_simulation_advance(struct PfSimulation *sim, int32_t *converged);

/**
 * Runs all remaining steps; `all_converged` (may be null) receives 1 if
 * every step of the run converged.
 *
 * # Safety
 * `sim` must be a live handle; `all_converged` null or writable.
 */
enum PfStatus pf_simulation_run(struct PfSimulation *sim, int32_t *all_converged);

/**
 * Steps completed so far and steps in the program.
 *
 * # Safety
 * `sim` must be a live handle; non-null outputs writable.
 */
enum PfStatus pf_simulation_progress(const struct PfSimulation *sim,
                                     size_t *completed,
                                     size_t *total);

/**
 * Energies (N·mm) and reaction (N) of the current state.
 *
 * # Safety
 * `sim` must be a live handle; `out` writable.
 */
enum PfStatus pf_simulation_energies(const struct PfSimulation *sim, struct PfEnergies *out);

/**
 * Copies nodal damage. With `buf` null only `required` is written.
 *
 * # Safety
 * `sim` must be a live handle; `buf` null or `len` writable doubles.
 */
enum PfStatus pf_simulation_damage(const struct PfSimulation *sim,
                                   double *buf,
                                   size_t len,
                                   size_t *required);

/**
 * Copies nodal displacement, interleaved by node (`dim` values per node).
 *
 * # Safety
 * `sim` must be a live handle; `buf` null or `len` writable doubles.
 */
enum PfStatus pf_simulation_displacement(const struct PfSimulation *sim,
                                         double *buf,
                                         size_t len,
                                         size_t *required);

/**
 * Writes a legacy VTK snapshot of the current state.
 *
 * # Safety
 * `sim` must be a live handle; `path` a NUL-terminated string.
 */
enum PfStatus pf_simulation_write_vtk(const struct PfSimulation *sim, const char *path);

/**
 * # Safety
 * `sim` must be null or a handle not freed before.
 */
void pf_simulation_free(struct PfSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASEFRAC_H */
