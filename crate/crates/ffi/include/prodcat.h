#ifndef PRODCAT_H
#define PRODCAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ProdcatStatus {
  PRODCAT_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  PRODCAT_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string was not UTF-8, or an index or enum value was out of range.
   */
  PRODCAT_STATUS_INVALID_ARGUMENT = 2,
  PRODCAT_STATUS_IO = 3,
  /**
   * Malformed or incompatible table data.
   */
  PRODCAT_STATUS_DATA = 4,
  /**
   * Invalid configuration or hyperparameters.
   */
  PRODCAT_STATUS_CONFIG = 5,
  /**
   * A target has fewer than two classes.
   */
  PRODCAT_STATUS_DEGENERATE_LABELS = 6,
  /**
   * Model file with the wrong version or corrupt contents.
   */
  PRODCAT_STATUS_MODEL = 7,
  /**
   * Internal error; the library caught a panic.
   */
  PRODCAT_STATUS_INTERNAL = 8,
} ProdcatStatus;

/**
 * Prediction targets, for [`prodcat_predictions_label`].
 */
typedef enum ProdcatTarget {
  PRODCAT_TARGET_TOP_CATEGORY = 0,
  PRODCAT_TARGET_BOTTOM_CATEGORY = 1,
  PRODCAT_TARGET_COLOR = 2,
} ProdcatTarget;

/**
 * A loaded or generated table.
 */
typedef struct ProdcatDataset ProdcatDataset;

/**
 * A trained ensemble.
 */
typedef struct ProdcatModel ProdcatModel;

/**
 * Per-row labels for the three targets.
 */
typedef struct ProdcatPredictions ProdcatPredictions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *prodcat_version(void);

/**
 * Message for the last failed call on this thread, or an empty string after
 * a successful call. Valid until the next library call on this thread.
 */
const char *prodcat_last_error(void);

/**
 * Loads a CSV table (with its optional `.schema.toml` sidecar).
 *
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum ProdcatStatus prodcat_dataset_load_csv(const char *path, struct ProdcatDataset **out);

/**
 * Generates a synthetic catalog with default generator settings.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ProdcatStatus prodcat_dataset_synthesize(size_t rows,
                                              uint64_t seed,
                                              struct ProdcatDataset **out);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t prodcat_dataset_row_count(const struct ProdcatDataset *dataset);

/**
 * # Safety
 * `dataset` must be NULL or a live handle; it is invalid afterwards.
 */
void prodcat_dataset_free(struct ProdcatDataset *dataset);

/**
 * Trains the ensemble. `config_path` may be NULL for the default config.
 *
 * # Safety
 * `dataset` must be a live handle, `config_path` NULL or a valid C string,
 * `out` a valid pointer.
 */
enum ProdcatStatus prodcat_model_train(const struct ProdcatDataset *dataset,
                                       const char *config_path,
                                       struct ProdcatModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a valid C string.
 */
enum ProdcatStatus prodcat_model_save(const struct ProdcatModel *model, const char *path);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ProdcatStatus prodcat_model_load(const char *path, struct ProdcatModel **out);

/**
 * # Safety
 * `model` must be NULL or a live handle; it is invalid afterwards.
 */
void prodcat_model_free(struct ProdcatModel *model);

/**
 * Predicts all three targets for every row of `dataset`.
 *
 * # Safety
 * `model` and `dataset` must be live handles and `out` a valid pointer.
 */
enum ProdcatStatus prodcat_predict(const struct ProdcatModel *model,
                                   const struct ProdcatDataset *dataset,
                                   struct ProdcatPredictions **out);

/**
 * Number of predicted rows, or 0 for NULL.
 *
 * # Safety
 * `predictions` must be NULL or a live handle.
 */
size_t prodcat_predictions_len(const struct ProdcatPredictions *predictions);

/**
 * Label predicted for `row` and `target` (a [`ProdcatTarget`] value). The
 * string stays valid until the predictions handle is freed.
 *
 * # Safety
 * `predictions` must be a live handle and `out` a valid pointer.
 */
enum ProdcatStatus prodcat_predictions_label(const struct ProdcatPredictions *predictions,
                                             size_t row,
                                             uint32_t target,
                                             const char **out);

/**
 * # Safety
 * `predictions` must be NULL or a live handle; it is invalid afterwards.
 */
void prodcat_predictions_free(struct ProdcatPredictions *predictions);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRODCAT_H */
