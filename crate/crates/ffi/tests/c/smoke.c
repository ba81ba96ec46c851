#include <math.h>
#include <stdio.h>
#include "dapsvrg.h"

int main(void) {
    DsRegularizer reg = {DS_REG_KIND_NUCLEAR, 1e-3, 0.0};
    DsProblem *p = NULL;
    if (ds_problem_generate_lowrank(6, 4, 2, 40, 3, 1e-3, reg, &p) != DS_STATUS_OK) return 1;

    DsRunConfig cfg;
    ds_run_config_default(p, DS_ALGORITHM_DAP_SVRG, 3, &cfg);
    cfg.stages = 4;
    DsRun *run = NULL;
    if (ds_run(p, &cfg, &run) != DS_STATUS_OK) return 2;

    DsEpochRow first, last;
    size_t rows = ds_run_row_count(run);
    ds_run_row(run, 0, &first);
    ds_run_row(run, rows - 1, &last);
    if (rows != 5 || !(last.objective < first.objective)) return 3;

    double x[24];
    if (ds_run_final_iterate(run, x, 23) != DS_STATUS_DIMENSION_MISMATCH) return 4;
    if (ds_last_error_message()[0] == '\0') return 5;

    double obj;
    ds_run_final_iterate(run, x, 24);
    ds_problem_objective(p, x, 24, &obj);
    if (fabs(obj - last.objective) > 1e-12 * fabs(obj)) return 6;

    ds_run_free(run);
    ds_problem_free(p);
    printf("ok %zu rows, objective %.6e\n", rows, obj);
    return 0;
}
