/* Minimal C client: builds a data set, runs an analysis, prints the selection. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "multisplit.h"

int main(void) {
    const size_t n = 60, p = 10;
    double *x = malloc(n * p * sizeof(double));
    double *y = malloc(n * sizeof(double));
    for (size_t j = 0; j < p; j++)
        for (size_t i = 0; i < n; i++)
            x[j * n + i] = sin(0.7 * (double)(i + 1) * (double)(j + 2) + (double)j);
    for (size_t i = 0; i < n; i++)
        y[i] = 3.0 * x[i] + 0.1 * cos(1.3 * (double)i);

    MsDataset *data = NULL;
    if (ms_dataset_new(y, x, n, p, &data) != MS_STATUS_OK) {
        fprintf(stderr, "dataset: %s\n", ms_last_error_message());
        return 1;
    }
    MsConfig cfg = ms_config_default();
    cfg.splits = 10;
    cfg.screener = MS_SCREENER_FIXED;

    MsResult *res = NULL;
    if (ms_analyze(data, &cfg, &res) != MS_STATUS_OK) {
        fprintf(stderr, "analyze: %s\n", ms_last_error_message());
        return 1;
    }
    size_t k = ms_result_num_selected(res);
    size_t *sel = malloc((k ? k : 1) * sizeof(size_t));
    ms_result_selected(res, sel, k);
    printf("selected %zu:", k);
    for (size_t i = 0; i < k; i++)
        printf(" %zu", sel[i]);
    printf("\n");

    cfg.alpha = 2.0;
    MsResult *bad = NULL;
    MsStatus st = ms_analyze(data, &cfg, &bad);
    printf("invalid alpha -> status %d (%s)\n", (int)st, ms_last_error_message());

    free(sel);
    ms_result_free(res);
    ms_dataset_free(data);
    free(x);
    free(y);
    return st == MS_STATUS_INVALID_INPUT ? 0 : 1;
}
