#ifndef METAADAPT_H
#define METAADAPT_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define MADP_OK 0

/**
 * Invalid configuration (bad hyperparameter, malformed config JSON).
 */
#define MADP_ERR_CONFIG 1

/**
 * Unusable input data (missing file, malformed dataset, bad checkpoint).
 */
#define MADP_ERR_DATA 2

/**
 * A non-finite value was produced during computation.
 */
#define MADP_ERR_NUMERIC 3

/**
 * Null pointer or non-UTF-8 string argument.
 */
#define MADP_ERR_ARGUMENT 4

/**
 * Unexpected internal failure.
 */
#define MADP_ERR_INTERNAL 5

/**
 * A loaded model: checkpointed parameters plus the featurization settings
 * needed to score raw text.
 */
typedef struct MadpModel MadpModel;

/**
 * Classification metrics over `n` examples.
 */
typedef struct MadpMetrics {
  /**
   * Balanced accuracy: mean of sensitivity and specificity.
   */
  double ba;
  double acc;
  double f1;
  uint64_t n;
} MadpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *madp_version(void);

/**
 * Message for the most recent error on this thread. Valid until the next
 * call into the library from the same thread.
 */
const char *madp_last_error(void);

/**
 * Run a full adaptation from a JSON run config (same schema as the CLI's
 * config file, including dataset paths and out_dir). On success fills
 * `out_metrics` with the target-test metrics of the selected model.
 *
 * # Safety
 * `config_json` must be null or NUL-terminated; `out_metrics` must be null
 * or valid for writes.
 */
int madp_run_adapt(const char *config_json, struct MadpMetrics *out_metrics);

/**
 * Generate a synthetic domain-shift corpus pair from a JSON generator
 * config and write `source.jsonl` / `target.jsonl` into `out_dir`.
 *
 * # Safety
 * Both pointers must be null or NUL-terminated strings.
 */
int madp_synth(const char *config_json, const char *out_dir);

/**
 * Verify second-order meta gradients against central finite differences on
 * `seeds` synthetic draws; writes the maximum relative error. Returns
 * `MADP_OK` even when the error exceeds the usual tolerance — the caller
 * owns the threshold.
 *
 * # Safety
 * `out_max_rel_err` must be null or valid for writes.
 */
int madp_gradcheck(uint64_t seeds, uintptr_t inner_steps, double *out_max_rel_err);

/**
 * Load a parameter checkpoint written by `adapt`. `ngram_orders` may be
 * null for the default orders {1, 2}; it must match the orders used in
 * training. Returns null on failure (see `madp_last_error`).
 *
 * # Safety
 * `checkpoint_path` must be null or NUL-terminated; `ngram_orders` must be
 * null or point to `n_orders` readable elements.
 */
struct MadpModel *madp_model_load(const char *checkpoint_path,
                                  const uintptr_t *ngram_orders,
                                  uintptr_t n_orders);

/**
 * Free a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer returned by `madp_model_load` that has
 * not been freed yet.
 */
void madp_model_free(struct MadpModel *model);

/**
 * Classify one raw text (preprocessing included). Writes the class
 * probabilities when `out_probs` (length 2) is non-null. Returns the
 * predicted label (0 or 1), or the negated error code on failure.
 *
 * # Safety
 * `model` must be a live handle; `text` null or NUL-terminated;
 * `out_probs` null or valid for 2 writes.
 */
int madp_model_predict(const struct MadpModel *model, const char *text, double *out_probs);

/**
 * Evaluate a model handle on a JSONL dataset (preprocessing included).
 *
 * # Safety
 * `model` must be a live handle; `dataset_path` null or NUL-terminated;
 * `out_metrics` null or valid for writes.
 */
int madp_model_evaluate(const struct MadpModel *model,
                        const char *dataset_path,
                        struct MadpMetrics *out_metrics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METAADAPT_H */
