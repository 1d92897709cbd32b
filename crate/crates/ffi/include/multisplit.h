#ifndef MULTISPLIT_H
#define MULTISPLIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_INPUT = 2,
  MS_STATUS_IO = 3,
  MS_STATUS_NUMERICAL = 4,
  MS_STATUS_BUFFER_TOO_SMALL = 5,
  MS_STATUS_PANIC = 6,
} MsStatus;

typedef enum MsScreener {
  MS_SCREENER_FIXED = 0,
  MS_SCREENER_CV = 1,
  MS_SCREENER_ADAP = 2,
  /**
   * Uniformly random set of `random_size` variables.
   */
  MS_SCREENER_RANDOM = 3,
} MsScreener;

typedef enum MsRule {
  MS_RULE_FWER = 0,
  MS_RULE_FDR = 1,
  MS_RULE_FDR_CORRECTED = 2,
  MS_RULE_EV = 3,
  MS_RULE_SINGLE_SPLIT = 4,
} MsRule;

typedef enum MsPValueMode {
  MS_P_VALUE_MODE_NORMAL = 0,
  MS_P_VALUE_MODE_STUDENT_T = 1,
} MsPValueMode;

/**
 * Opaque data set handle.
 */
typedef struct MsDataset MsDataset;

/**
 * Opaque analysis result handle.
 */
typedef struct MsResult MsResult;

/**
 * Analysis settings. Enum-valued fields hold the integer values of
 * `MsScreener`, `MsRule` and `MsPValueMode`.
 */
typedef struct MsConfig {
  size_t splits;
  uint32_t screener;
  size_t random_size;
  uint32_t rule;
  uint32_t pvalue_mode;
  double alpha;
  double q;
  double gamma_min;
  double k;
  uint64_t seed;
} MsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/**
 * Defaults: 50 splits, adaptive-Lasso screening, FWER at 0.05, q = 0.05,
 * gamma_min = 0.05, K = 20, normal p-values, seed 1.
 */
struct MsConfig ms_config_default(void);

/**
 * Builds a data set from `y` (length `n`) and `x` (`n * p` values, column
 * major). The data are copied.
 *
 * # Safety
 * `y` and `x` must point to `n` and `n * p` readable doubles; `out` must be
 * writable.
 */
enum MsStatus ms_dataset_new(const double *y,
                             const double *x,
                             size_t n,
                             size_t p,
                             struct MsDataset **out);

/**
 * Reads a CSV file. `response_column` is 1-based.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_dataset_from_csv(const char *path,
                                  bool has_header,
                                  char delimiter,
                                  size_t response_column,
                                  struct MsDataset **out);

/**
 * # Safety
 * `dataset` must come from this library or be null.
 */
void ms_dataset_free(struct MsDataset *dataset);

/**
 * Number of observations; 0 for a null handle.
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t ms_dataset_n(const struct MsDataset *dataset);

/**
 * Number of predictors; 0 for a null handle.
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t ms_dataset_p(const struct MsDataset *dataset);

/**
 * Runs the analysis. Results depend only on the data and `config`.
 *
 * # Safety
 * `dataset` and `config` must be valid; `out` must be writable.
 */
enum MsStatus ms_analyze(const struct MsDataset *dataset,
                         const struct MsConfig *config,
                         struct MsResult **out);

/**
 * # Safety
 * `result` must come from this library or be null.
 */
void ms_result_free(struct MsResult *result);

/**
 * Number of variables `p`; 0 for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t ms_result_num_variables(const struct MsResult *result);

/**
 * Number of splits `B`; 0 for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t ms_result_num_splits(const struct MsResult *result);

/**
 * Number of selected variables; 0 for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t ms_result_num_selected(const struct MsResult *result);

/**
 * Copies the `p` p-values the rule acted on into `buffer`.
 *
 * # Safety
 * `buffer` must hold `len` writable doubles.
 */
enum MsStatus ms_result_pvalues(const struct MsResult *result, double *buffer, size_t len);

/**
 * Copies the selected variables (0-based, ascending) into `buffer`.
 *
 * # Safety
 * `buffer` must hold `len` writable `size_t` values.
 */
enum MsStatus ms_result_selected(const struct MsResult *result, size_t *buffer, size_t len);

/**
 * Copies the `B x p` per-split adjusted p-values, row major, into `buffer`.
 *
 * # Safety
 * `buffer` must hold `len` writable doubles.
 */
enum MsStatus ms_result_split_pvalues(const struct MsResult *result, double *buffer, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTISPLIT_H */
