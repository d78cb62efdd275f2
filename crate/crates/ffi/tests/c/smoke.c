#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "biofilm_fv.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        BfvStatus s_ = (call);                                             \
        if (s_ != BFV_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    bfv_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    BfvMesh *mesh = NULL;
    BfvModel *model = NULL;
    BfvSolver *solver = NULL;
    double alphas[2] = {1.0, 1.0};
    double u_d[2] = {0.1, 0.1};
    double u[2 * 16];
    double h0, h1;

    CHECK(bfv_mesh_rectangle(4, 4, "y == 1", &mesh));
    CHECK(bfv_model_builtin(1, alphas, 2, &model));
    for (int k = 0; k < 32; ++k) u[k] = (k % 5 == 0) ? 0.2 : 0.1;
    CHECK(bfv_solver_new(mesh, model, u_d, u, bfv_newton_options_default(), &solver));
    bfv_mesh_free(mesh);
    bfv_model_free(model);

    CHECK(bfv_solver_entropy(solver, &h0));
    CHECK(bfv_solver_advance(solver, 0.01));
    CHECK(bfv_solver_entropy(solver, &h1));
    CHECK(bfv_solver_state(solver, u, 32));
    if (!(h1 < h0) || fabs(bfv_solver_time(solver) - 0.01) > 1e-15) return 2;

    if (bfv_mesh_rectangle(1, 4, "y == 1", &mesh) == BFV_STATUS_OK) return 3;
    bfv_solver_free(solver);
    printf("ok %s %.6f %.6f\n", bfv_version(), h0, h1);
    return 0;
}
