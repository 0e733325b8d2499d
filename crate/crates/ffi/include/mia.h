#ifndef MIA_H
#define MIA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MiaLevel {
  MIA_LEVEL_UTTERANCE = 0,
  MIA_LEVEL_SPEAKER = 1,
} MiaLevel;

typedef enum MiaMembership {
  MIA_MEMBERSHIP_UNKNOWN = 0,
  MIA_MEMBERSHIP_SEEN = 1,
  MIA_MEMBERSHIP_UNSEEN = 2,
} MiaMembership;

typedef enum MiaMetric {
  MIA_METRIC_COSINE = 0,
  MIA_METRIC_EUCLIDEAN = 1,
} MiaMetric;

// Result code of every fallible call.
typedef enum MiaStatus {
  MIA_STATUS_OK = 0,
  MIA_STATUS_NULL_POINTER = 1,
  MIA_STATUS_INVALID_ARGUMENT = 2,
  MIA_STATUS_IO = 3,
  MIA_STATUS_FORMAT = 4,
  MIA_STATUS_VALIDATION = 5,
  MIA_STATUS_DEGENERATE_VECTOR = 6,
  MIA_STATUS_TOO_FEW_FRAMES = 7,
  MIA_STATUS_TOO_FEW_UTTERANCES = 8,
  MIA_STATUS_INSUFFICIENT_DATA = 9,
  MIA_STATUS_INSUFFICIENT_PAIRS = 10,
  MIA_STATUS_CONFIG = 11,
  MIA_STATUS_DATA = 12,
  MIA_STATUS_EVALUATION = 13,
  MIA_STATUS_PANIC = 99,
} MiaStatus;

// A loaded feature dataset.
typedef struct MiaDataset MiaDataset;

// A trained attack network.
typedef struct MiaModel MiaModel;

// A table of per-utterance or per-speaker scores.
typedef struct MiaScoreTable MiaScoreTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *mia_version(void);

// Message of the last failed call on this thread ("" after a success).
const char *mia_last_error_message(void);

// Opens the dataset described by an NDJSON manifest.
//
// # Safety
// `manifest_path` must be a NUL-terminated string; `out` must be writable.
enum MiaStatus mia_dataset_open(const char *manifest_path, struct MiaDataset **out);

// Number of utterances in the dataset; 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t mia_dataset_len(const struct MiaDataset *dataset);

// Feature dimension `q`; 0 for NULL or an empty dataset.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t mia_dataset_dim(const struct MiaDataset *dataset);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void mia_dataset_free(struct MiaDataset *dataset);

// Basic attack over a dataset. Items that cannot be scored are left out
// of the table and counted in `skipped` (may be NULL).
//
// # Safety
// `dataset` must be a live handle; `out` must be writable; `skipped` must be
// NULL or writable.
enum MiaStatus mia_score_dataset(const struct MiaDataset *dataset,
                                 enum MiaLevel level,
                                 enum MiaMetric metric,
                                 struct MiaScoreTable **out,
                                 size_t *skipped);

// Reads an `id,score,membership` CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MiaStatus mia_score_table_read_csv(const char *path,
                                        enum MiaLevel level,
                                        struct MiaScoreTable **out);

// Writes the table as `id,score,membership` CSV.
//
// # Safety
// `table` must be a live handle; `path` a NUL-terminated string.
enum MiaStatus mia_score_table_write_csv(const struct MiaScoreTable *table, const char *path);

// Row count; 0 for NULL.
//
// # Safety
// `table` must be NULL or a live handle.
size_t mia_score_table_len(const struct MiaScoreTable *table);

// Score and membership of row `index`. Either out pointer may be NULL.
//
// # Safety
// `table` must be a live handle; out pointers NULL or writable.
enum MiaStatus mia_score_table_row(const struct MiaScoreTable *table,
                                   size_t index,
                                   double *score,
                                   enum MiaMembership *membership);

// # Safety
// `table` must be NULL or a handle not yet freed.
void mia_score_table_free(struct MiaScoreTable *table);

// Area under the ROC curve of a labeled table.
//
// # Safety
// `table` must be a live handle; `out` writable.
enum MiaStatus mia_auc(const struct MiaScoreTable *table, double *out);

// Highest TPR among thresholds with FPR at most `fpr_target`.
//
// # Safety
// `table` must be a live handle; `out` writable.
enum MiaStatus mia_tpr_at_fpr(const struct MiaScoreTable *table, double fpr_target, double *out);

// Utterance score of an `m x q` row-major frame matrix.
//
// # Safety
// `frames` must point to `m * q` doubles; `out` writable.
enum MiaStatus mia_utterance_score(const double *frames,
                                   size_t m,
                                   size_t q,
                                   enum MiaMetric metric,
                                   double *out);

// Cosine similarity of two vectors of length `len`.
//
// # Safety
// `a` and `b` must point to `len` doubles; `out` writable.
enum MiaStatus mia_cosine_similarity(const double *a, const double *b, size_t len, double *out);

// Loads a trained attack network from a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum MiaStatus mia_model_load(const char *path, struct MiaModel **out);

// Attack level of the model.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum MiaStatus mia_model_level(const struct MiaModel *model, enum MiaLevel *out);

// Feature dimension the model expects.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum MiaStatus mia_model_q(const struct MiaModel *model, size_t *out);

// Improved attack over a dataset, at the model's level.
//
// # Safety
// `model` and `dataset` must be live handles; `out` writable; `skipped`
// NULL or writable.
enum MiaStatus mia_model_score_dataset(const struct MiaModel *model,
                                       const struct MiaDataset *dataset,
                                       struct MiaScoreTable **out,
                                       size_t *skipped);

// # Safety
// `model` must be NULL or a handle not yet freed.
void mia_model_free(struct MiaModel *model);

// Runs the full pipeline from a JSON config file into `out_dir`, exactly as
// `mia pipeline --config <config_path> --out <out_dir>` does. `overwrite` is
// nonzero to empty a non-empty `out_dir`.
//
// # Safety
// `config_path` and `out_dir` must be NUL-terminated strings.
enum MiaStatus mia_run_pipeline(const char *config_path, const char *out_dir, int32_t overwrite);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIA_H */
