#include "mmlc/mmlc.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "baselines.hpp"
#include "dataset.hpp"
#include "filling.hpp"
#include "harness.hpp"
#include "json.hpp"
#include "model.hpp"
#include "spectral.hpp"
#include "synth.hpp"

using nlohmann::json;

struct mmlc_dataset {
  mmlc::CrowdDataset impl;
};

struct mmlc_model {
  mmlc::MmlcParameters impl;
};

namespace {

thread_local std::string g_last_error;

mmlc_status status_of(mmlc::ErrorCode code) {
  using mmlc::ErrorCode;
  switch (code) {
    case ErrorCode::Io: return MMLC_ERR_IO;
    case ErrorCode::MalformedRow: return MMLC_ERR_MALFORMED_ROW;
    case ErrorCode::UnknownReference: return MMLC_ERR_UNKNOWN_REFERENCE;
    case ErrorCode::DuplicateLabel: return MMLC_ERR_DUPLICATE_LABEL;
    case ErrorCode::EmptyDataset: return MMLC_ERR_EMPTY_DATASET;
    case ErrorCode::IncompleteTruth: return MMLC_ERR_INCOMPLETE_TRUTH;
    case ErrorCode::UnlabeledItem: return MMLC_ERR_UNLABELED_ITEM;
    case ErrorCode::InvalidConfig: return MMLC_ERR_INVALID_CONFIG;
    case ErrorCode::DimensionMismatch: return MMLC_ERR_DIMENSION_MISMATCH;
    case ErrorCode::IndexOutOfRange: return MMLC_ERR_INDEX_OUT_OF_RANGE;
    case ErrorCode::EmptyBatch: return MMLC_ERR_EMPTY_BATCH;
    case ErrorCode::NumericalUnderflow: return MMLC_ERR_NUMERICAL_UNDERFLOW;
    case ErrorCode::MissingTruth: return MMLC_ERR_MISSING_TRUTH;
    case ErrorCode::UnknownWorker: return MMLC_ERR_UNKNOWN_WORKER;
    case ErrorCode::MissingWeights: return MMLC_ERR_MISSING_WEIGHTS;
    case ErrorCode::EmptyMatrix: return MMLC_ERR_EMPTY_MATRIX;
    case ErrorCode::UnknownMethod: return MMLC_ERR_UNKNOWN_METHOD;
  }
  return MMLC_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
mmlc_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MMLC_OK;
  } catch (const mmlc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return MMLC_ERR_INVALID_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MMLC_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mmlc_status require_arg(bool ok, const char* what) {
  if (ok) return MMLC_OK;
  g_last_error = std::string("null argument: ") + what;
  return MMLC_ERR_INVALID_ARGUMENT;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    mmlc::fail(mmlc::ErrorCode::InvalidConfig,
               std::string(what) + " is not valid JSON: " + e.what());
  }
}

mmlc::SynthConfig synth_config_from_json(const json& j) {
  mmlc::harness::RunConfig probe = mmlc::harness::parse_run_config(json{{"synth", j}});
  return *probe.synth;
}

mmlc::MmlcConfig model_config_from_json(const json& j, const mmlc::CrowdDataset& dataset) {
  mmlc::harness::RunConfig probe = mmlc::harness::parse_run_config(json{{"model", j}});
  mmlc::MmlcConfig config = probe.model;
  config.feature_dim = dataset.feature_dim();
  config.num_workers = dataset.num_workers();
  config.num_classes = dataset.num_classes();
  return config;
}

json result_json(const mmlc::InferenceResult& result, const mmlc::CrowdDataset& dataset) {
  json labels = json::object();
  for (int i = 0; i < dataset.num_items(); ++i)
    labels[dataset.item_ids()[i]] = dataset.class_names()[result.labels[i]];
  json j{{"method", result.method},
         {"iterations", result.iterations},
         {"converged", result.converged},
         {"labels", std::move(labels)}};
  if (dataset.has_truth()) j["accuracy"] = mmlc::accuracy(result, dataset.truth());
  return j;
}

json fill_report_json(const mmlc::FillReport& report) {
  return json{{"filler", report.filler},
              {"num_original", report.num_original},
              {"num_filled", report.num_filled},
              {"final_density", report.final_density},
              {"seed", report.seed}};
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

extern "C" {

const char* mmlc_version(void) { return "0.1.0"; }

const char* mmlc_status_name(mmlc_status status) {
  switch (status) {
    case MMLC_OK: return "Ok";
    case MMLC_ERR_IO: return "IoError";
    case MMLC_ERR_MALFORMED_ROW: return "MalformedRow";
    case MMLC_ERR_UNKNOWN_REFERENCE: return "UnknownReference";
    case MMLC_ERR_DUPLICATE_LABEL: return "DuplicateLabel";
    case MMLC_ERR_EMPTY_DATASET: return "EmptyDataset";
    case MMLC_ERR_INCOMPLETE_TRUTH: return "IncompleteTruth";
    case MMLC_ERR_UNLABELED_ITEM: return "UnlabeledItem";
    case MMLC_ERR_INVALID_CONFIG: return "InvalidConfig";
    case MMLC_ERR_DIMENSION_MISMATCH: return "DimensionMismatch";
    case MMLC_ERR_INDEX_OUT_OF_RANGE: return "IndexOutOfRange";
    case MMLC_ERR_EMPTY_BATCH: return "EmptyBatch";
    case MMLC_ERR_NUMERICAL_UNDERFLOW: return "NumericalUnderflow";
    case MMLC_ERR_MISSING_TRUTH: return "MissingTruth";
    case MMLC_ERR_UNKNOWN_WORKER: return "UnknownWorker";
    case MMLC_ERR_MISSING_WEIGHTS: return "MissingWeights";
    case MMLC_ERR_EMPTY_MATRIX: return "EmptyMatrix";
    case MMLC_ERR_UNKNOWN_METHOD: return "UnknownMethod";
    case MMLC_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case MMLC_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* mmlc_last_error_message(void) { return g_last_error.c_str(); }

void mmlc_string_free(char* s) { std::free(s); }

mmlc_status mmlc_dataset_load(const char* features_csv, const char* labels_csv,
                              const char* truth_csv, mmlc_dataset** out) {
  if (mmlc_status s = require_arg(features_csv && labels_csv && out, "paths/out")) return s;
  return guarded([&] {
    std::optional<std::string> truth;
    if (truth_csv != nullptr) truth = truth_csv;
    *out = new mmlc_dataset{mmlc::load_dataset(features_csv, labels_csv, truth)};
  });
}

mmlc_status mmlc_dataset_save(const mmlc_dataset* dataset, const char* features_csv,
                              const char* labels_csv, const char* truth_csv) {
  if (mmlc_status s = require_arg(dataset && features_csv && labels_csv, "dataset/paths"))
    return s;
  return guarded([&] {
    std::optional<std::string> truth;
    if (truth_csv != nullptr) truth = truth_csv;
    mmlc::save_dataset(dataset->impl, features_csv, labels_csv, truth);
  });
}

mmlc_status mmlc_dataset_synth(const char* synth_config_json, mmlc_dataset** out,
                               char** manifest_json_out) {
  if (mmlc_status s = require_arg(synth_config_json && out, "config/out")) return s;
  return guarded([&] {
    mmlc::SynthConfig config =
        synth_config_from_json(parse_json(synth_config_json, "synth config"));
    mmlc::SynthResult result = mmlc::synth_generate(config);
    if (manifest_json_out != nullptr) {
      json workers = json::array();
      for (Eigen::Index j = 0; j < result.worker_projections.rows(); ++j)
        workers.push_back(vector_json(result.worker_projections.row(j).transpose()));
      json manifest{{"oracle_projection", vector_json(result.oracle_projection)},
                    {"worker_projections", std::move(workers)},
                    {"num_labels", result.dataset.num_labels()},
                    {"data_density", mmlc::density(result.dataset)}};
      *manifest_json_out = copy_string(manifest.dump());
    }
    *out = new mmlc_dataset{std::move(result.dataset)};
  });
}

mmlc_status mmlc_dataset_cap_redundancy(const mmlc_dataset* dataset, int max_labels,
                                        uint64_t seed, mmlc_dataset** out) {
  if (mmlc_status s = require_arg(dataset && out, "dataset/out")) return s;
  return guarded([&] {
    *out = new mmlc_dataset{mmlc::apply_redundancy_cap(dataset->impl, max_labels, seed)};
  });
}

mmlc_status mmlc_dataset_stats(const mmlc_dataset* dataset, char** stats_json_out) {
  if (mmlc_status s = require_arg(dataset && stats_json_out, "dataset/out")) return s;
  return guarded([&] {
    const mmlc::CrowdDataset& ds = dataset->impl;
    json j{{"num_items", ds.num_items()},
           {"num_workers", ds.num_workers()},
           {"num_classes", ds.num_classes()},
           {"num_labels", ds.num_labels()},
           {"feature_dim", ds.feature_dim()},
           {"density", mmlc::density(ds)},
           {"class_names", ds.class_names()},
           {"has_truth", ds.has_truth()}};
    *stats_json_out = copy_string(j.dump());
  });
}

void mmlc_dataset_free(mmlc_dataset* dataset) { delete dataset; }

mmlc_status mmlc_model_train(const mmlc_dataset* dataset, const char* model_config_json,
                             mmlc_model** out, char** training_log_json_out) {
  if (mmlc_status s = require_arg(dataset && out, "dataset/out")) return s;
  return guarded([&] {
    json config_json =
        model_config_json != nullptr ? parse_json(model_config_json, "model config") : json::object();
    mmlc::MmlcConfig config = model_config_from_json(config_json, dataset->impl);
    mmlc::MmlcParameters model = mmlc::init_model(config);
    model.worker_ids = dataset->impl.worker_ids();
    auto [trained, log] = mmlc::train(std::move(model), dataset->impl);
    if (training_log_json_out != nullptr) {
      json jlog{{"epoch_mean_loss", log.epoch_mean_loss}};
      *training_log_json_out = copy_string(jlog.dump());
    }
    *out = new mmlc_model{std::move(trained)};
  });
}

mmlc_status mmlc_model_save(const mmlc_model* model, const char* path) {
  if (mmlc_status s = require_arg(model && path, "model/path")) return s;
  return guarded([&] { mmlc::save_model(model->impl, path); });
}

mmlc_status mmlc_model_load(const char* path, mmlc_model** out) {
  if (mmlc_status s = require_arg(path && out, "path/out")) return s;
  return guarded([&] { *out = new mmlc_model{mmlc::load_model(path)}; });
}

void mmlc_model_free(mmlc_model* model) { delete model; }

mmlc_status mmlc_infer(const mmlc_dataset* dataset, const char* method,
                       const char* options_json, char** result_json_out) {
  if (mmlc_status s = require_arg(dataset && method && result_json_out, "dataset/method/out"))
    return s;
  return guarded([&] {
    int max_iters = 100;
    double tol = 1e-6;
    if (options_json != nullptr) {
      json options = parse_json(options_json, "options");
      max_iters = options.value("max_iters", max_iters);
      tol = options.value("tol", tol);
    }
    const mmlc::CrowdDataset& ds = dataset->impl;
    std::string name(method);
    mmlc::InferenceResult result;
    if (name == "mv") result = mmlc::mv_infer(ds);
    else if (name == "ds") result = mmlc::ds_infer(ds, max_iters, tol).result;
    else if (name == "fds") result = mmlc::fds_infer(ds, max_iters).result;
    else if (name == "hds") result = mmlc::hds_infer(ds, max_iters, tol).result;
    else mmlc::fail(mmlc::ErrorCode::UnknownMethod, "unknown method '" + name + "'");
    *result_json_out = copy_string(result_json(result, ds).dump());
  });
}

mmlc_status mmlc_owf_infer(const mmlc_model* model, const mmlc_dataset* dataset,
                           const char* cluster_method, double kde_bandwidth,
                           char** result_json_out) {
  if (mmlc_status s =
          require_arg(model && dataset && cluster_method && result_json_out, "arguments"))
    return s;
  return guarded([&] {
    mmlc::ClusterMethod method;
    method.kind = mmlc::parse_cluster_kind(cluster_method);
    if (kde_bandwidth > 0.0) method.kde_bandwidth = kde_bandwidth;
    mmlc::WorkerProjectionMatrix projections =
        mmlc::worker_projections(model->impl, dataset->impl);
    Eigen::VectorXd v_oracle = mmlc::find_oracle(projections, method);
    mmlc::InferenceResult result = mmlc::oracle_labels(model->impl, v_oracle, dataset->impl);
    json j = result_json(result, dataset->impl);
    j["cluster_method"] = cluster_method;
    j["v_oracle"] = vector_json(v_oracle);
    *result_json_out = copy_string(j.dump());
  });
}

mmlc_status mmlc_truth_upper_bound(const mmlc_model* model, const mmlc_dataset* dataset,
                                   char** result_json_out) {
  if (mmlc_status s = require_arg(model && dataset && result_json_out, "arguments")) return s;
  return guarded([&] {
    mmlc::UpperBoundResult result = mmlc::truth_upper_bound(model->impl, dataset->impl);
    json j{{"projection", vector_json(result.projection)}, {"accuracy", result.accuracy}};
    *result_json_out = copy_string(j.dump());
  });
}

mmlc_status mmlc_export_projections(const mmlc_model* model, const mmlc_dataset* dataset,
                                    const char* csv_path) {
  if (mmlc_status s = require_arg(model && dataset && csv_path, "arguments")) return s;
  return guarded([&] {
    mmlc::WorkerProjectionMatrix projections =
        mmlc::worker_projections(model->impl, dataset->impl);
    std::optional<std::vector<double>> accuracies;
    if (dataset->impl.has_truth()) accuracies = mmlc::worker_accuracies(dataset->impl);
    mmlc::export_projections(projections, csv_path, accuracies);
  });
}

mmlc_status mmlc_fill_full(const mmlc_model* model, const mmlc_dataset* dataset,
                           mmlc_dataset** filled_out, char** fill_report_json_out) {
  if (mmlc_status s = require_arg(model && dataset && filled_out, "arguments")) return s;
  return guarded([&] {
    mmlc::FillReport report = mmlc::fill_full(model->impl, dataset->impl);
    if (fill_report_json_out != nullptr)
      *fill_report_json_out = copy_string(fill_report_json(report).dump());
    *filled_out = new mmlc_dataset{std::move(report.filled)};
  });
}

mmlc_status mmlc_fill_to_target(const mmlc_model* model, const mmlc_dataset* dataset,
                                int per_worker_target, uint64_t seed,
                                mmlc_dataset** filled_out, char** fill_report_json_out) {
  if (mmlc_status s = require_arg(model && dataset && filled_out, "arguments")) return s;
  return guarded([&] {
    mmlc::FillReport report =
        mmlc::fill_to_target(model->impl, dataset->impl, per_worker_target, seed);
    if (fill_report_json_out != nullptr)
      *fill_report_json_out = copy_string(fill_report_json(report).dump());
    *filled_out = new mmlc_dataset{std::move(report.filled)};
  });
}

mmlc_status mmlc_gmv_fill(const mmlc_dataset* dataset, uint64_t seed,
                          mmlc_dataset** filled_out, char** fill_report_json_out) {
  if (mmlc_status s = require_arg(dataset && filled_out, "arguments")) return s;
  return guarded([&] {
    mmlc::FillReport report = mmlc::gmv_fill(dataset->impl, seed);
    if (fill_report_json_out != nullptr)
      *fill_report_json_out = copy_string(fill_report_json(report).dump());
    *filled_out = new mmlc_dataset{std::move(report.filled)};
  });
}

mmlc_status mmlc_run(const char* command, const char* run_config_json,
                     char** report_json_out) {
  if (mmlc_status s = require_arg(command && run_config_json, "command/config")) return s;
  return guarded([&] {
    mmlc::harness::RunConfig config =
        mmlc::harness::parse_run_config(parse_json(run_config_json, "run config"));
    json report = mmlc::harness::run_command(command, config);
    if (report_json_out != nullptr) *report_json_out = copy_string(report.dump(2));
  });
}

}  // extern "C"
