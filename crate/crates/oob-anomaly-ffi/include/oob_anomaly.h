#ifndef OOB_ANOMALY_H
#define OOB_ANOMALY_H

/* Generated by cbindgen from oob-anomaly-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this interface.
 */
typedef enum OobStatus {
  /**
   * The call succeeded.
   */
  OOB_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  OOB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  OOB_STATUS_INVALID_UTF8 = 2,
  /**
   * The input file could not be read.
   */
  OOB_STATUS_IO = 3,
  /**
   * The input file could not be parsed.
   */
  OOB_STATUS_PARSE = 4,
  /**
   * A parameter was out of range.
   */
  OOB_STATUS_CONFIG = 5,
  /**
   * The data violates a contract (constant column, bad label, ...).
   */
  OOB_STATUS_DATA = 6,
  /**
   * An output buffer was too small or an index out of range.
   */
  OOB_STATUS_BOUNDS = 7,
  /**
   * The library panicked; this is a bug.
   */
  OOB_STATUS_INTERNAL = 8,
} OobStatus;

/**
 * A loaded dataset. Create with [`oob_dataset_from_csv`], destroy with
 * [`oob_dataset_free`].
 */
typedef struct OobDataset OobDataset;

/**
 * A finished scoring run. Destroy with [`oob_report_free`].
 */
typedef struct OobReport OobReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *oob_version(void);

/**
 * Message of the last error on this thread, or null when none happened.
 * The caller owns the returned string and frees it with
 * [`oob_string_free`].
 */
char *oob_last_error_message(void);

/**
 * Free a string returned by this library.
 *
 * # Safety
 * `s` must have been returned by [`oob_last_error_message`] and not freed
 * already; null is accepted and ignored.
 */
void oob_string_free(char *s);

/**
 * Load a CSV file (header row, comma separated, UTF-8) into a dataset.
 *
 * `cat_threshold` is the distinct-ratio below which integer-valued columns
 * are treated as categorical (the usual choice is 0.05). When
 * `drop_missing_rows` is false, rows with empty cells fail the load.
 *
 * # Safety
 * `path` must point to a NUL-terminated string and `out` to writable
 * storage for one pointer. On success `*out` owns the dataset.
 */
enum OobStatus oob_dataset_from_csv(const char *path,
                                    double cat_threshold,
                                    bool drop_missing_rows,
                                    struct OobDataset **out);

/**
 * # Safety
 * `dataset` must come from [`oob_dataset_from_csv`] and not be freed
 * twice; null is accepted and ignored.
 */
void oob_dataset_free(struct OobDataset *dataset);

/**
 * Number of rows, or 0 for null.
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t oob_dataset_rows(const struct OobDataset *dataset);

/**
 * Number of columns, or 0 for null.
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t oob_dataset_columns(const struct OobDataset *dataset);

/**
 * Score every row of the dataset: one ensemble of `n_trees` trees per
 * feature, minimum leaf size `ceil(min_leaf_fraction * rows)`, all work
 * seeded by `seed`. Uses every available core.
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable storage for one
 * pointer. On success `*out` owns the report.
 */
enum OobStatus oob_score(const struct OobDataset *dataset,
                         size_t n_trees,
                         double min_leaf_fraction,
                         uint64_t seed,
                         struct OobReport **out);

/**
 * # Safety
 * `report` must come from [`oob_score`] and not be freed twice; null is
 * accepted and ignored.
 */
void oob_report_free(struct OobReport *report);

/**
 * Number of scored rows, or 0 for null.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
size_t oob_report_rows(const struct OobReport *report);

/**
 * Number of scored features, or 0 for null.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
size_t oob_report_features(const struct OobReport *report);

/**
 * Copy the per-row total scores (sums of scaled per-feature scores) into
 * `out`, which holds `len` doubles; `len` must equal the row count.
 *
 * # Safety
 * `report` must be a live handle and `out` writable for `len` doubles.
 */
enum OobStatus oob_report_total_scores(const struct OobReport *report, double *out, size_t len);

/**
 * Copy one feature's scaled scores (in [0, 1]) into `out`, which holds
 * `len` doubles; `len` must equal the row count.
 *
 * # Safety
 * `report` must be a live handle and `out` writable for `len` doubles.
 */
enum OobStatus oob_report_feature_scores(const struct OobReport *report,
                                         size_t feature,
                                         double *out,
                                         size_t len);

/**
 * Row indices of the ceil(pct * rows) highest scores, highest first (ties
 * go to the lower index). `written` receives how many indices were stored;
 * `cap` is the capacity of `out`.
 *
 * # Safety
 * `report` must be a live handle, `out` writable for `cap` values and
 * `written` for one value.
 */
enum OobStatus oob_report_top_indices(const struct OobReport *report,
                                      double pct,
                                      size_t *out,
                                      size_t cap,
                                      size_t *written);

/**
 * ROC AUC of `scores` against binary `labels` (1 = anomaly), computed by
 * the tie-aware rank statistic. Fails with `Data` when labels are all one
 * class.
 *
 * # Safety
 * `scores` and `labels` must hold `len` readable values; `out` must be
 * writable for one double.
 */
enum OobStatus oob_roc_auc(const double *scores, const uint8_t *labels, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OOB_ANOMALY_H */
