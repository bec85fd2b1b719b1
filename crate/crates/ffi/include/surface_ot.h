#ifndef SURFACE_OT_H
#define SURFACE_OT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SotStatus {
  SOT_STATUS_OK = 0,
  SOT_STATUS_NULL_POINTER = 1,
  SOT_STATUS_INVALID_ARGUMENT = 2,
  SOT_STATUS_IO = 3,
  SOT_STATUS_PARSE = 4,
  SOT_STATUS_INVALID_MESH = 5,
  SOT_STATUS_INVALID_DENSITY = 6,
  SOT_STATUS_SOLVER = 7,
  SOT_STATUS_NOT_CONVERGED = 8,
  SOT_STATUS_PANIC = 9,
} SotStatus;

/**
 * A solved geodesic.
 */
typedef struct SotGeodesic SotGeodesic;

/**
 * A triangle mesh with its operators.
 */
typedef struct SotMesh SotMesh;

/**
 * Solver settings. `initial_penalty <= 0` selects the default.
 */
typedef struct SotConfig {
  size_t time_steps;
  double initial_penalty;
  double tol;
  size_t max_iters;
  double alpha;
  bool penalty_adapt;
} SotConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *sot_last_error_message(void);

/**
 * Library defaults (31 time steps, tolerance 1e-4, 5000 iterations).
 */
struct SotConfig sot_config_default(void);

/**
 * Loads an OFF or OBJ file (format from the extension).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SotStatus sot_mesh_load(const char *path, struct SotMesh **out);

/**
 * Builds a mesh from `3 * num_vertices` coordinates and `3 * num_faces`
 * zero-based indices.
 *
 * # Safety
 * The arrays must hold the stated number of values; `out` must be writable.
 */
enum SotStatus sot_mesh_from_arrays(const double *vertices,
                                    size_t num_vertices,
                                    const uint32_t *faces,
                                    size_t num_faces,
                                    struct SotMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from this library not yet freed.
 */
void sot_mesh_free(struct SotMesh *mesh);

/**
 * Vertex count, 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t sot_mesh_num_vertices(const struct SotMesh *mesh);

/**
 * Copies the barycentric vertex areas into `out` (length `len`).
 *
 * # Safety
 * `mesh` must be a live handle and `out` must hold `len` values.
 */
enum SotStatus sot_mesh_vertex_areas(const struct SotMesh *mesh, double *out, size_t len);

/**
 * Scales nonnegative per-vertex values to unit mass, in place.
 *
 * # Safety
 * `mesh` must be a live handle and `values` must hold `len` values.
 */
enum SotStatus sot_normalize_density(const struct SotMesh *mesh, double *values, size_t len);

/**
 * Solves the geodesic between two densities of length `len`. A null
 * `config` uses the defaults. Returns `SOT_STATUS_OK` even when the
 * iteration limit was hit; query [`sot_geodesic_converged`].
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum SotStatus sot_geodesic_solve(const struct SotMesh *mesh,
                                  const double *mu0,
                                  const double *mu1,
                                  size_t len,
                                  const struct SotConfig *config,
                                  struct SotGeodesic **out);

/**
 * Distance only. Writes the value and returns `SOT_STATUS_NOT_CONVERGED`
 * if the tolerance was not reached.
 *
 * # Safety
 * As for [`sot_geodesic_solve`]; `distance` must be writable.
 */
enum SotStatus sot_distance(const struct SotMesh *mesh,
                            const double *mu0,
                            const double *mu1,
                            size_t len,
                            const struct SotConfig *config,
                            double *distance);

/**
 * # Safety
 * `g` must be null or a handle from [`sot_geodesic_solve`] not yet freed.
 */
void sot_geodesic_free(struct SotGeodesic *g);

/**
 * NaN for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
double sot_geodesic_distance(const struct SotGeodesic *g);

/**
 * # Safety
 * `g` must be null or a live handle.
 */
bool sot_geodesic_converged(const struct SotGeodesic *g);

/**
 * # Safety
 * `g` must be null or a live handle.
 */
size_t sot_geodesic_iterations(const struct SotGeodesic *g);

/**
 * Number of density frames (the centered time steps).
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t sot_geodesic_num_frames(const struct SotGeodesic *g);

/**
 * Copies frame `k` into `out` (length `len`, the vertex count).
 *
 * # Safety
 * `g` must be a live handle and `out` must hold `len` values.
 */
enum SotStatus sot_geodesic_frame(const struct SotGeodesic *g, size_t k, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFACE_OT_H */
