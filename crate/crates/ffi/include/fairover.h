/* Generated at build time. Do not edit. */

#ifndef FAIROVER_H
#define FAIROVER_H

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum FoStatus {
  FO_STATUS_OK = 0,
  FO_STATUS_NULL_POINTER = 1,
  FO_STATUS_INVALID_ARGUMENT = 2,
  FO_STATUS_VALIDATION = 3,
  FO_STATUS_IO = 4,
  FO_STATUS_RUNTIME = 5,
  FO_STATUS_PANIC = 6,
} FoStatus;

typedef enum FoTechnique {
  FO_TECHNIQUE_ORIGINAL = 0,
  FO_TECHNIQUE_SMOTE = 1,
  FO_TECHNIQUE_FSMOTE = 2,
  FO_TECHNIQUE_FBSMOTE = 3,
  FO_TECHNIQUE_FADASYN = 4,
  FO_TECHNIQUE_HETERO_FAIR = 5,
} FoTechnique;

typedef enum FoMetric {
  FO_METRIC_STATISTICAL_PARITY = 0,
  FO_METRIC_EQUAL_OPPORTUNITY = 1,
  FO_METRIC_EQUALIZED_ODDS = 2,
} FoMetric;

// Opaque dataset handle.
typedef struct FoDataset FoDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null after
// a successful call. Valid until the next fairover call on this thread.
const char *fo_last_error(void);

// Loads a CSV file described by a TOML schema file.
//
// # Safety
// `csv_path` and `schema_path` must be null or NUL-terminated strings;
// `out` must be null or point to writable storage for a handle.
enum FoStatus fo_dataset_load_csv(const char *csv_path,
                                  const char *schema_path,
                                  struct FoDataset **out);

// Builds a dataset from a row-major `n x d` feature array, `n` labels
// (0 or 1) and `n` group ids below `m`. The inputs are copied.
//
// # Safety
// Each pointer must be null or valid for the stated number of elements.
enum FoStatus fo_dataset_from_arrays(const double *features,
                                     size_t n,
                                     size_t d,
                                     const uint8_t *labels,
                                     const size_t *groups,
                                     size_t m,
                                     struct FoDataset **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `ds` must be null or a handle returned by this library, not yet freed.
void fo_dataset_free(struct FoDataset *ds);

// Number of instances, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t fo_dataset_len(const struct FoDataset *ds);

// Feature dimension, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t fo_dataset_dim(const struct FoDataset *ds);

// Number of groups, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t fo_dataset_groups(const struct FoDataset *ds);

// Copies the row-major features (`len >= n * d`).
//
// # Safety
// `ds` must be null or a live handle; `out` must be valid for `len` writes.
enum FoStatus fo_dataset_copy_features(const struct FoDataset *ds, double *out, size_t len);

// Copies the labels (`len >= n`).
//
// # Safety
// `ds` must be null or a live handle; `out` must be valid for `len` writes.
enum FoStatus fo_dataset_copy_labels(const struct FoDataset *ds, uint8_t *out, size_t len);

// Copies the group ids (`len >= n`).
//
// # Safety
// `ds` must be null or a live handle; `out` must be valid for `len` writes.
enum FoStatus fo_dataset_copy_groups(const struct FoDataset *ds, size_t *out, size_t len);

// Writes `2 * m` imbalance degrees; entry `class * m + group` belongs to
// that cluster.
//
// # Safety
// `ds` must be null or a live handle; `out` must be valid for `len` writes.
enum FoStatus fo_dataset_imbalance_degrees(const struct FoDataset *ds, size_t *out, size_t len);

// Writes the dataset as CSV, without provenance columns.
//
// # Safety
// `ds` must be null or a live handle; `path` null or NUL-terminated.
enum FoStatus fo_dataset_save_csv(const struct FoDataset *ds, const char *path);

// Oversamples `ds` into a new handle. The first `n` rows of the result are
// the input rows in order; synthetic rows follow. Protected-attribute
// feature columns are copied from the source instance.
//
// # Safety
// `ds` must be null or a live handle; `out` null or writable.
enum FoStatus fo_oversample(const struct FoDataset *ds,
                            enum FoTechnique technique,
                            size_t k,
                            uint64_t seed,
                            struct FoDataset **out);

// Balanced accuracy of binary predictions.
//
// # Safety
// `y_true` and `y_pred` must be valid for `n` reads; `out` writable.
enum FoStatus fo_balanced_accuracy(const uint8_t *y_true,
                                   const uint8_t *y_pred,
                                   size_t n,
                                   double *out);

// Disparity (max minus min over groups) of a group fairness metric.
// `y_true` may be null for statistical parity.
//
// # Safety
// Non-null arrays must be valid for `n` reads; `out` writable.
enum FoStatus fo_disparity(enum FoMetric metric,
                           const uint8_t *y_true,
                           const uint8_t *y_pred,
                           const size_t *groups,
                           size_t n,
                           size_t m,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIROVER_H */
