#ifndef MMLC_MMLC_H
#define MMLC_MMLC_H

/*
 * C API of the mmlc truth-inference toolkit.
 *
 * All functions return mmlc_status; MMLC_OK means success. On failure a
 * human-readable detail is available from mmlc_last_error_message() (thread
 * local). Objects returned through out-parameters are owned by the caller
 * and released with the matching *_free function; strings returned through
 * char** out-parameters are released with mmlc_string_free().
 *
 * Structured inputs and outputs (model configuration, inference results,
 * fill reports, run configs) are JSON documents; see the project README
 * for the schemas.
 */

#include <stddef.h>
#include <stdint.h>

#if defined _WIN32 || defined __CYGWIN__
#define MMLC_API __declspec(dllexport)
#elif __GNUC__ >= 4
#define MMLC_API __attribute__((visibility("default")))
#else
#define MMLC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque handles. */
typedef struct mmlc_dataset mmlc_dataset;
typedef struct mmlc_model mmlc_model;

typedef enum mmlc_status {
  MMLC_OK = 0,
  MMLC_ERR_IO = 1,
  MMLC_ERR_MALFORMED_ROW = 2,
  MMLC_ERR_UNKNOWN_REFERENCE = 3,
  MMLC_ERR_DUPLICATE_LABEL = 4,
  MMLC_ERR_EMPTY_DATASET = 5,
  MMLC_ERR_INCOMPLETE_TRUTH = 6,
  MMLC_ERR_UNLABELED_ITEM = 7,
  MMLC_ERR_INVALID_CONFIG = 8,
  MMLC_ERR_DIMENSION_MISMATCH = 9,
  MMLC_ERR_INDEX_OUT_OF_RANGE = 10,
  MMLC_ERR_EMPTY_BATCH = 11,
  MMLC_ERR_NUMERICAL_UNDERFLOW = 12,
  MMLC_ERR_MISSING_TRUTH = 13,
  MMLC_ERR_UNKNOWN_WORKER = 14,
  MMLC_ERR_MISSING_WEIGHTS = 15,
  MMLC_ERR_EMPTY_MATRIX = 16,
  MMLC_ERR_UNKNOWN_METHOD = 17,
  MMLC_ERR_INVALID_ARGUMENT = 18,
  MMLC_ERR_INTERNAL = 19
} mmlc_status;

MMLC_API const char* mmlc_version(void);

/* Stable name of a status code, e.g. "DuplicateLabel". */
MMLC_API const char* mmlc_status_name(mmlc_status status);

/* Detail message of the most recent failure on this thread. */
MMLC_API const char* mmlc_last_error_message(void);

MMLC_API void mmlc_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

/*
 * Loads a dataset from CSV files. truth_csv may be NULL. Formats:
 *   features.csv  item_id,f0,...,f{d-1}
 *   labels.csv    item_id,worker_id,label[,provenance]
 *   truth.csv     item_id,label
 */
MMLC_API mmlc_status mmlc_dataset_load(const char* features_csv, const char* labels_csv,
                                       const char* truth_csv, mmlc_dataset** out);

/* Writes the dataset back to CSV; truth_csv may be NULL to skip truth. */
MMLC_API mmlc_status mmlc_dataset_save(const mmlc_dataset* dataset, const char* features_csv,
                                       const char* labels_csv, const char* truth_csv);

/*
 * Generates a synthetic dataset with known ground truth from a JSON config
 * {"num_items", "num_workers", "num_classes", "feature_dim", "density",
 *  "worker_noise", "seed"}. manifest_json_out (optional) receives the
 * generator manifest including the true oracle projection.
 */
MMLC_API mmlc_status mmlc_dataset_synth(const char* synth_config_json, mmlc_dataset** out,
                                        char** manifest_json_out);

/* Keeps at most max_labels seeded-uniformly chosen labels per item. */
MMLC_API mmlc_status mmlc_dataset_cap_redundancy(const mmlc_dataset* dataset, int max_labels,
                                                 uint64_t seed, mmlc_dataset** out);

/* JSON summary: counts, density, class names, truth availability. */
MMLC_API mmlc_status mmlc_dataset_stats(const mmlc_dataset* dataset, char** stats_json_out);

MMLC_API void mmlc_dataset_free(mmlc_dataset* dataset);

/* ---- model ------------------------------------------------------------- */

/*
 * Trains the mixture-of-experts worker behavior model on the dataset.
 * model_config_json holds {"num_experts", "expert_layer_sizes",
 * "gate_hidden_size", "output_hidden_size", "lambda", "learning_rate",
 * "batch_size", "epochs", "seed"}; missing fields take library defaults.
 * training_log_json_out (optional) receives per-epoch mean losses.
 */
MMLC_API mmlc_status mmlc_model_train(const mmlc_dataset* dataset,
                                      const char* model_config_json, mmlc_model** out,
                                      char** training_log_json_out);

MMLC_API mmlc_status mmlc_model_save(const mmlc_model* model, const char* path);
MMLC_API mmlc_status mmlc_model_load(const char* path, mmlc_model** out);
MMLC_API void mmlc_model_free(mmlc_model* model);

/* ---- truth inference ---------------------------------------------------- */

/*
 * Runs a statistical baseline: method is "mv", "ds", "fds" or "hds".
 * options_json may be NULL or {"max_iters", "tol"}. The result JSON holds
 * {"method", "iterations", "converged", "labels", "accuracy"?}.
 */
MMLC_API mmlc_status mmlc_infer(const mmlc_dataset* dataset, const char* method,
                                const char* options_json, char** result_json_out);

/*
 * Oracle-worker-finding inference: locates the oracle projection with the
 * given cluster method ("mean", "median", "kde", "mean-w", "median-w",
 * "kde-w"; kde_bandwidth <= 0 selects the Silverman rule) and labels every
 * item from it. Adds "v_oracle" and "cluster_method" to the result JSON.
 */
MMLC_API mmlc_status mmlc_owf_infer(const mmlc_model* model, const mmlc_dataset* dataset,
                                    const char* cluster_method, double kde_bandwidth,
                                    char** result_json_out);

/*
 * Optimizes a projection vector directly against the dataset's ground
 * truth with experts and output head frozen; the result JSON holds
 * {"projection", "accuracy"}.
 */
MMLC_API mmlc_status mmlc_truth_upper_bound(const mmlc_model* model,
                                            const mmlc_dataset* dataset,
                                            char** result_json_out);

/* Writes worker_id,v0..v{E-1},weight[,accuracy] rows to csv_path. */
MMLC_API mmlc_status mmlc_export_projections(const mmlc_model* model,
                                             const mmlc_dataset* dataset,
                                             const char* csv_path);

/* ---- data filling -------------------------------------------------------- */

/*
 * Completes every unlabeled (item, worker) pair with the model prediction;
 * the filled dataset has density exactly 1. fill_report_json_out
 * (optional) receives {"filler", "num_original", "num_filled",
 * "final_density", "seed"}.
 */
MMLC_API mmlc_status mmlc_fill_full(const mmlc_model* model, const mmlc_dataset* dataset,
                                    mmlc_dataset** filled_out, char** fill_report_json_out);

/* Raises each worker to min(per_worker_target, num_items) labels. */
MMLC_API mmlc_status mmlc_fill_to_target(const mmlc_model* model, const mmlc_dataset* dataset,
                                         int per_worker_target, uint64_t seed,
                                         mmlc_dataset** filled_out,
                                         char** fill_report_json_out);

/* Majority-vote filler baseline (no model needed). */
MMLC_API mmlc_status mmlc_gmv_fill(const mmlc_dataset* dataset, uint64_t seed,
                                   mmlc_dataset** filled_out, char** fill_report_json_out);

/* ---- experiment harness -------------------------------------------------- */

/*
 * Executes one harness command ("synth", "infer", "train", "owf", "fill",
 * "fill-infer", "sweep-redundancy", "sweep-density",
 * "export-projections") with a run-config JSON document. Artifacts and
 * report.json are written into the config's out_dir; report_json_out
 * (optional) receives the report.
 */
MMLC_API mmlc_status mmlc_run(const char* command, const char* run_config_json,
                              char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* MMLC_MMLC_H */
