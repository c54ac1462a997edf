#ifndef LABELDIST_H
#define LABELDIST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LdStatus {
  LD_STATUS_OK = 0,
  LD_STATUS_NULL_POINTER = 1,
  LD_STATUS_INVALID_UTF8 = 2,
  /*
   Bad argument or configuration.
   */
  LD_STATUS_CONFIG = 3,
  /*
   Malformed, inconsistent or insufficient data.
   */
  LD_STATUS_DATA = 4,
  /*
   The output buffer is too small; the needed length was written back.
   */
  LD_STATUS_BUFFER_TOO_SMALL = 5,
  LD_STATUS_PANIC = 6,
} LdStatus;

typedef enum LdTargetMode {
  LD_TARGET_MODE_HARD = 0,
  LD_TARGET_MODE_SMOOTHED = 1,
  LD_TARGET_MODE_SOFT = 2,
  LD_TARGET_MODE_DIRICHLET = 3,
} LdTargetMode;

/*
 Items with their annotation counts.
 */
typedef struct LdDataset LdDataset;

/*
 A fitted Dawid-Skene model.
 */
typedef struct LdDsModel LdDsModel;

/*
 Per-item predicted distributions.
 */
typedef struct LdPredictions LdPredictions;

/*
 Evaluation metrics. Correlations are NaN when undefined.
 */
typedef struct LdMetrics {
  double accuracy;
  double ece;
  double brier_soft;
  double dist_ece;
  double mean_kl;
  double entropy_pearson;
  double entropy_spearman;
  double rel;
  double res;
  double unc;
  size_t n_items;
} LdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or null. The pointer is
 valid until the next call into this library on the same thread.
 */
const char *ld_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ld_version(void);

/*
 Load a counts JSONL. `field_map_json` may be null for the ChaosNLI layout.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum LdStatus ld_dataset_from_counts_jsonl(const char *path,
                                           const char *field_map_json,
                                           struct LdDataset **out);

/*
 Load a long CSV (`item_id,rater_id,label`) and collapse it to counts.
 `class_names` is a comma-separated list fixing the class order.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum LdStatus ld_dataset_from_long_csv(const char *path,
                                       const char *class_names,
                                       struct LdDataset **out);

/*
 # Safety
 `ds` must come from this library and not be used afterwards.
 */
void ld_dataset_free(struct LdDataset *ds);

/*
 Number of items, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t ld_dataset_len(const struct LdDataset *ds);

/*
 Number of classes, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t ld_dataset_k(const struct LdDataset *ds);

/*
 Training targets for every item, row-major `len × k`. A negative
 `subsample_n` uses the full counts.

 # Safety
 `ds` must be a live handle; `out` must hold `*out_len` doubles.
 */
enum LdStatus ld_dataset_targets(const struct LdDataset *ds,
                                 enum LdTargetMode mode,
                                 double alpha,
                                 int64_t subsample_n,
                                 uint64_t seed,
                                 double *out,
                                 size_t *out_len);

/*
 Fit Dawid-Skene on a long CSV.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum LdStatus ld_ds_fit(const char *path,
                        const char *class_names,
                        size_t max_iter,
                        double tol,
                        struct LdDsModel **out);

/*
 # Safety
 `model` must come from this library and not be used afterwards.
 */
void ld_ds_free(struct LdDsModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t ld_ds_n_items(const struct LdDsModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
bool ld_ds_converged(const struct LdDsModel *model);

/*
 Item posteriors, row-major `n_items × k`, items in first-appearance order.

 # Safety
 `model` must be a live handle; `out` must hold `*out_len` doubles.
 */
enum LdStatus ld_ds_posteriors(const struct LdDsModel *model, double *out, size_t *out_len);

/*
 Final observed-data log-likelihood.

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum LdStatus ld_ds_loglik(const struct LdDsModel *model, double *out);

/*
 Load predictions JSONL as written by `labeldist train`.

 # Safety
 `path` must be NUL-terminated; `out` must be writable.
 */
enum LdStatus ld_predictions_load(const char *path, struct LdPredictions **out);

/*
 # Safety
 `preds` must come from this library and not be used afterwards.
 */
void ld_predictions_free(struct LdPredictions *preds);

/*
 # Safety
 `preds` must be null or a live handle.
 */
size_t ld_predictions_len(const struct LdPredictions *preds);

/*
 Score predictions against the dataset's human distributions. Only items
 present in both are scored; a prediction for an unknown item is an error.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum LdStatus ld_evaluate(const struct LdDataset *ds,
                          const struct LdPredictions *preds,
                          size_t n_bins,
                          struct LdMetrics *out);

/*
 KL(reference ‖ predicted) in nats, prediction floored at 1e-12.

 # Safety
 Both arrays must hold `k` doubles; `out` must be writable.
 */
enum LdStatus ld_kl_divergence(const double *reference,
                               const double *predicted,
                               size_t k,
                               double *out);

/*
 Share of the hard-to-full improvement reached at N, in percent.

 # Safety
 `out` must be writable.
 */
enum LdStatus ld_pct_improvement(double hard, double at_n, double full, double *out);

/*
 Paired t-test on `x - y`. Any of the out-pointers may be null.

 # Safety
 `x` and `y` must hold `n` doubles.
 */
enum LdStatus ld_paired_ttest(const double *x,
                              const double *y,
                              size_t n,
                              bool one_sided,
                              double *t_out,
                              double *df_out,
                              double *p_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LABELDIST_H */
