#ifndef BIOFILM_FV_H
#define BIOFILM_FV_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/*
 Status codes; the library error codes match the CLI exit codes.
 */
typedef enum BfvStatus {
  BFV_STATUS_OK = 0,
  /*
   Invalid configuration, parameters or data.
   */
  BFV_STATUS_CONFIG = 2,
  /*
   Newton or time stepping failure.
   */
  BFV_STATUS_SOLVER = 3,
  /*
   Inadmissible or malformed mesh.
   */
  BFV_STATUS_MESH = 4,
  /*
   A required pointer argument was null.
   */
  BFV_STATUS_NULL_POINTER = 10,
  /*
   A string argument was not valid UTF-8 or an output buffer was too small.
   */
  BFV_STATUS_INVALID_ARGUMENT = 11,
  /*
   An unexpected internal panic was caught at the boundary.
   */
  BFV_STATUS_PANIC = 99,
} BfvStatus;

typedef struct BfvMesh BfvMesh;

typedef struct BfvModel BfvModel;

typedef struct BfvSolver BfvSolver;

/*
 Time stepping and Newton settings.
 */
typedef struct BfvNewtonOptions {
  double tol;
  uint32_t max_iters;
  double dt_min;
  double dt_max;
  double dt_init;
  bool adaptive;
} BfvNewtonOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failing call on this thread; empty after a success.
 The pointer stays valid until the next call into the library on this
 thread.
 */
const char *bfv_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *bfv_version(void);

/*
 Uniform mesh of `(0, 1)`. `dirichlet_side`: 0 left, 1 right, 2 both.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum BfvStatus bfv_mesh_interval(size_t n_cells, uint32_t dirichlet_side, struct BfvMesh **out);

/*
 Uniform `nx × ny` rectangle mesh of the unit square; boundary edges whose
 midpoint satisfies `dirichlet` (e.g. `"y == 1"`) carry the Dirichlet datum.

 # Safety
 `dirichlet` must be a NUL-terminated string and `out` writable.
 */
enum BfvStatus bfv_mesh_rectangle(size_t nx,
                                  size_t ny,
                                  const char *dirichlet,
                                  struct BfvMesh **out);

/*
 Triangle mesh from `n_nodes` points (`xy[2 * k]`, `xy[2 * k + 1]`) and
 `n_triangles` vertex triples. Fails with `Mesh` for obtuse or right
 triangles.

 # Safety
 `xy` must hold `2 * n_nodes` values, `triangles` `3 * n_triangles`
 indices; `dirichlet` must be NUL-terminated and `out` writable.
 */
enum BfvStatus bfv_mesh_triangles(const double *xy,
                                  size_t n_nodes,
                                  const uint32_t *triangles,
                                  size_t n_triangles,
                                  const char *dirichlet,
                                  struct BfvMesh **out);

/*
 Triangle mesh from a file, refined `refinements` times.

 # Safety
 `path` and `dirichlet` must be NUL-terminated and `out` writable.
 */
enum BfvStatus bfv_mesh_read(const char *path,
                             uint32_t refinements,
                             const char *dirichlet,
                             struct BfvMesh **out);

/*
 Number of cells, or 0 for a null handle.

 # Safety
 `mesh` must be null or a live handle.
 */
size_t bfv_mesh_n_cells(const struct BfvMesh *mesh);

/*
 Regularity constant ξ of the mesh, or NaN for a null handle.

 # Safety
 `mesh` must be null or a live handle.
 */
double bfv_mesh_xi(const struct BfvMesh *mesh);

/*
 Cell centers as `x, y` pairs; `len` must be at least `2 * n_cells`.

 # Safety
 `mesh` must be a live handle and `out` must hold `len` values.
 */
enum BfvStatus bfv_mesh_cell_centers(const struct BfvMesh *mesh, double *out, size_t len);

/*
 # Safety
 `mesh` must be null or a handle not yet freed.
 */
void bfv_mesh_free(struct BfvMesh *mesh);

/*
 Built-in model: `which = 1` for `p = exp(-1/(1-x))`, `a = b = 2`;
 `which = 2` for `p = 1 - x`, `a = b = 1`. One diffusivity per species.

 # Safety
 `alphas` must hold `n_species` values and `out` must be writable.
 */
enum BfvStatus bfv_model_builtin(uint32_t which,
                                 const double *alphas,
                                 size_t n_species,
                                 struct BfvModel **out);

/*
 Evaluates `g(M) = q(M)/p(M)`.

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum BfvStatus bfv_model_g(const struct BfvModel *model, double m, double *out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void bfv_model_free(struct BfvModel *model);

/*
 Default Newton settings: tol 1e-10, 50 iterations, adaptive steps in
 `[1e-8, 1e-2]` starting at 1e-5.
 */
struct BfvNewtonOptions bfv_newton_options_default(void);

/*
 Solver for one mesh and model. Copies the mesh and model, so both
 handles may be freed afterwards. `u_d` holds the Dirichlet datum,
 `initial` the cell-major initial values (`n_cells * n_species`).

 # Safety
 Handles must be live, the arrays must have the stated lengths and `out`
 must be writable.
 */
enum BfvStatus bfv_solver_new(const struct BfvMesh *mesh,
                              const struct BfvModel *model,
                              const double *u_d,
                              const double *initial,
                              struct BfvNewtonOptions options,
                              struct BfvSolver **out);

/*
 Advances the solution to `t_end`. On failure the state is unchanged.

 # Safety
 `solver` must be a live handle.
 */
enum BfvStatus bfv_solver_advance(struct BfvSolver *solver, double t_end);

/*
 Current time, or NaN for a null handle.

 # Safety
 `solver` must be null or a live handle.
 */
double bfv_solver_time(const struct BfvSolver *solver);

/*
 Copies the cell-major state into `out` (`len >= n_cells * n_species`).

 # Safety
 `solver` must be a live handle and `out` must hold `len` values.
 */
enum BfvStatus bfv_solver_state(const struct BfvSolver *solver, double *out, size_t len);

/*
 Discrete relative entropy of the current state.

 # Safety
 `solver` must be a live handle and `out` writable.
 */
enum BfvStatus bfv_solver_entropy(const struct BfvSolver *solver, double *out);

/*
 # Safety
 `solver` must be null or a handle not yet freed.
 */
void bfv_solver_free(struct BfvSolver *solver);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIOFILM_FV_H */
