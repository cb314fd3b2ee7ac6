#include "harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "baselines.hpp"
#include "filling.hpp"

namespace mmlc::harness {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void require_keys(const json& j, const std::vector<std::string>& known,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      fail(ErrorCode::InvalidConfig, "unknown config key '" + it.key() + "' in " + where);
  }
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

struct MethodOutcome {
  InferenceResult result;
  std::optional<double> acc;
  json extra = json::object();
};

CrowdDataset obtain_dataset(const RunConfig& config) {
  if (config.synth.has_value()) {
    if (config.features_path.has_value() || config.labels_path.has_value())
      fail(ErrorCode::InvalidConfig, "configure either dataset files or synth, not both");
    return synth_generate(*config.synth).dataset;
  }
  if (!config.features_path.has_value() || !config.labels_path.has_value())
    fail(ErrorCode::InvalidConfig, "dataset requires features and labels paths (or synth)");
  return load_dataset(*config.features_path, *config.labels_path, config.truth_path);
}

MmlcParameters obtain_model(const RunConfig& config, const CrowdDataset& dataset,
                            uint64_t model_seed, TrainingLog* log_out = nullptr) {
  if (config.model_path.has_value()) {
    MmlcParameters model = load_model(*config.model_path);
    require_model_matches(model, dataset);
    return model;
  }
  MmlcConfig model_config = config.model;
  model_config.feature_dim = dataset.feature_dim();
  model_config.num_workers = dataset.num_workers();
  model_config.num_classes = dataset.num_classes();
  model_config.seed = model_seed;
  MmlcParameters model = init_model(model_config);
  model.worker_ids = dataset.worker_ids();
  auto [trained, log] = train(std::move(model), dataset);
  if (log_out != nullptr) *log_out = log;
  return trained;
}

MethodOutcome run_method(const std::string& method, const CrowdDataset& dataset,
                         const RunConfig& config, uint64_t model_seed) {
  MethodOutcome outcome;
  if (method == "mv") {
    outcome.result = mv_infer(dataset);
  } else if (method == "ds") {
    outcome.result = ds_infer(dataset, config.em_max_iters, config.em_tol).result;
  } else if (method == "fds") {
    outcome.result = fds_infer(dataset, config.em_max_iters).result;
  } else if (method == "hds") {
    outcome.result = hds_infer(dataset, config.em_max_iters, config.em_tol).result;
  } else if (method == "mmlc-owf") {
    MmlcParameters model = obtain_model(config, dataset, model_seed);
    WorkerProjectionMatrix projections = worker_projections(model, dataset);
    Eigen::VectorXd v_oracle = find_oracle(projections, config.cluster);
    outcome.result = oracle_labels(model, v_oracle, dataset);
    outcome.extra["cluster_method"] = cluster_kind_name(config.cluster.kind);
    outcome.extra["v_oracle"] = vector_to_json(v_oracle);
  } else {
    fail(ErrorCode::UnknownMethod, "unknown method '" + method + "'");
  }
  if (dataset.has_truth()) outcome.acc = accuracy(outcome.result, dataset.truth());
  return outcome;
}

json labels_to_json(const InferenceResult& result, const CrowdDataset& dataset) {
  json labels = json::object();
  for (int i = 0; i < dataset.num_items(); ++i)
    labels[dataset.item_ids()[i]] = dataset.class_names()[result.labels[i]];
  return labels;
}

json result_to_json(const MethodOutcome& outcome, const CrowdDataset& dataset) {
  json j;
  j["method"] = outcome.result.method;
  j["iterations"] = outcome.result.iterations;
  j["converged"] = outcome.result.converged;
  if (outcome.acc.has_value()) j["accuracy"] = *outcome.acc;
  j["labels"] = labels_to_json(outcome.result, dataset);
  for (auto it = outcome.extra.begin(); it != outcome.extra.end(); ++it)
    j[it.key()] = it.value();
  return j;
}

double sample_std(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

std::string format_csv_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

FillReport run_filler(const RunConfig& config, const CrowdDataset& dataset,
                      uint64_t model_seed) {
  if (config.filler == "mmlc-df") {
    MmlcParameters model = obtain_model(config, dataset, model_seed);
    if (config.per_worker_target.has_value())
      return fill_to_target(model, dataset, *config.per_worker_target, config.seed);
    return fill_full(model, dataset);
  }
  if (config.filler == "gmv") return gmv_fill(dataset, config.seed);
  fail(ErrorCode::UnknownMethod, "unknown filler '" + config.filler + "'");
}

json fill_report_to_json(const FillReport& report) {
  return json{{"filler", report.filler},
              {"num_original", report.num_original},
              {"num_filled", report.num_filled},
              {"final_density", report.final_density},
              {"seed", report.seed}};
}

// --- commands ------------------------------------------------------------

json cmd_synth(const RunConfig& config, const fs::path& out_dir,
               std::vector<std::string>& artifacts) {
  if (!config.synth.has_value()) fail(ErrorCode::InvalidConfig, "synth command needs a synth config");
  SynthResult synth = synth_generate(*config.synth);

  save_features_csv(synth.dataset, (out_dir / "features.csv").string());
  save_labels_csv(synth.dataset, (out_dir / "labels.csv").string());
  save_truth_csv(synth.dataset, (out_dir / "truth.csv").string());

  json worker_rows = json::array();
  for (Eigen::Index j = 0; j < synth.worker_projections.rows(); ++j)
    worker_rows.push_back(vector_to_json(synth.worker_projections.row(j).transpose()));
  json manifest{{"num_items", config.synth->num_items},
                {"num_workers", config.synth->num_workers},
                {"num_classes", config.synth->num_classes},
                {"feature_dim", config.synth->feature_dim},
                {"density", config.synth->density},
                {"worker_noise", config.synth->worker_noise},
                {"seed", config.synth->seed},
                {"oracle_projection", vector_to_json(synth.oracle_projection)},
                {"worker_projections", worker_rows},
                {"class_names", synth.dataset.class_names()},
                {"num_labels", synth.dataset.num_labels()},
                {"data_density", density(synth.dataset)}};
  {
    std::ofstream out(out_dir / "manifest.json");
    if (!out) fail(ErrorCode::Io, "cannot write manifest.json");
    out << manifest.dump(2) << "\n";
  }
  artifacts.insert(artifacts.end(), {"features.csv", "labels.csv", "truth.csv", "manifest.json"});
  return json{{"manifest", manifest}};
}

json cmd_infer(const RunConfig& config, const fs::path&, std::vector<std::string>&) {
  CrowdDataset dataset = obtain_dataset(config);
  MethodOutcome outcome = run_method(config.method, dataset, config, config.model.seed);
  return result_to_json(outcome, dataset);
}

json cmd_train(const RunConfig& config, const fs::path& out_dir,
               std::vector<std::string>& artifacts) {
  CrowdDataset dataset = obtain_dataset(config);
  TrainingLog log;
  MmlcParameters model = obtain_model(config, dataset, config.model.seed, &log);
  save_model(model, (out_dir / "model.json").string());
  artifacts.push_back("model.json");
  json j{{"model_file", "model.json"},
         {"epochs", model.config.epochs},
         {"epoch_mean_loss", log.epoch_mean_loss}};
  if (!log.epoch_mean_loss.empty()) j["final_epoch_loss"] = log.epoch_mean_loss.back();
  return j;
}

json cmd_owf(const RunConfig& config, const fs::path&, std::vector<std::string>&) {
  CrowdDataset dataset = obtain_dataset(config);
  RunConfig owf_config = config;
  owf_config.method = "mmlc-owf";
  MethodOutcome outcome = run_method("mmlc-owf", dataset, owf_config, config.model.seed);
  return result_to_json(outcome, dataset);
}

json cmd_fill(const RunConfig& config, const fs::path& out_dir,
              std::vector<std::string>& artifacts) {
  CrowdDataset dataset = obtain_dataset(config);
  FillReport report = run_filler(config, dataset, config.model.seed);
  save_labels_csv(report.filled, (out_dir / "labels_filled.csv").string());
  artifacts.push_back("labels_filled.csv");
  json j = fill_report_to_json(report);
  j["labels_file"] = "labels_filled.csv";
  return j;
}

json cmd_fill_infer(const RunConfig& config, const fs::path&, std::vector<std::string>&) {
  CrowdDataset dataset = obtain_dataset(config);
  if (!dataset.has_truth())
    fail(ErrorCode::MissingTruth, "fill-infer reports accuracy deltas and needs ground truth");

  MethodOutcome original = run_method(config.method, dataset, config, config.model.seed);
  FillReport fill = run_filler(config, dataset, config.model.seed);
  MethodOutcome filled = run_method(config.method, fill.filled, config, config.model.seed);

  json j;
  j["method"] = config.method;
  j["fill"] = fill_report_to_json(fill);
  j["original"] = result_to_json(original, dataset);
  j["filled"] = result_to_json(filled, fill.filled);
  j["delta"] = *filled.acc - *original.acc;
  return j;
}

json cmd_sweep_redundancy(const RunConfig& config, const fs::path& out_dir,
                          std::vector<std::string>& artifacts) {
  if (config.redundancy_list.empty())
    fail(ErrorCode::InvalidConfig, "sweep-redundancy needs a non-empty redundancy_list");
  CrowdDataset dataset = obtain_dataset(config);
  if (!dataset.has_truth())
    fail(ErrorCode::MissingTruth, "sweeps report accuracy and need ground truth");

  json rows = json::array();
  std::string csv = "R,method,mean,std\n";
  for (int cap : config.redundancy_list) {
    std::vector<std::vector<double>> per_method(config.methods.size());
    std::vector<uint64_t> seeds;
    for (int rep = 0; rep < config.repeats; ++rep) {
      uint64_t rep_seed = config.seed + static_cast<uint64_t>(rep);
      seeds.push_back(rep_seed);
      CrowdDataset capped = apply_redundancy_cap(dataset, cap, rep_seed);
      for (size_t m = 0; m < config.methods.size(); ++m)
        per_method[m].push_back(
            *run_method(config.methods[m], capped, config, rep_seed).acc);
    }
    for (size_t m = 0; m < config.methods.size(); ++m) {
      double mean = 0.0;
      for (double a : per_method[m]) mean += a;
      mean /= static_cast<double>(per_method[m].size());
      double std_dev = sample_std(per_method[m], mean);
      rows.push_back(json{{"R", cap},
                          {"method", config.methods[m]},
                          {"mean", mean},
                          {"std_sample", std_dev},
                          {"runs", per_method[m]},
                          {"seeds", seeds}});
      csv += std::to_string(cap) + "," + config.methods[m] + "," +
             format_csv_double(mean) + "," + format_csv_double(std_dev) + "\n";
    }
  }
  {
    std::ofstream out(out_dir / "sweep_redundancy.csv");
    if (!out) fail(ErrorCode::Io, "cannot write sweep_redundancy.csv");
    out << csv;
  }
  artifacts.push_back("sweep_redundancy.csv");
  return json{{"rows", rows}, {"csv_file", "sweep_redundancy.csv"}};
}

json cmd_sweep_density(const RunConfig& config, const fs::path& out_dir,
                       std::vector<std::string>& artifacts) {
  if (config.target_list.empty())
    fail(ErrorCode::InvalidConfig, "sweep-density needs a non-empty target_list");
  if (config.filler != "mmlc-df")
    fail(ErrorCode::InvalidConfig, "sweep-density fills with the trained model (filler mmlc-df)");
  CrowdDataset dataset = obtain_dataset(config);
  if (!dataset.has_truth())
    fail(ErrorCode::MissingTruth, "sweeps report accuracy and need ground truth");

  // accuracies[target][method][repeat]; the fill count per target does not
  // depend on the repeat seed, so the density column is per target.
  std::vector<std::vector<std::vector<double>>> accuracies(
      config.target_list.size(), std::vector<std::vector<double>>(config.methods.size()));
  std::vector<double> densities(config.target_list.size(), 0.0);
  std::vector<uint64_t> seeds;
  for (int rep = 0; rep < config.repeats; ++rep) {
    uint64_t rep_seed = config.seed + static_cast<uint64_t>(rep);
    seeds.push_back(rep_seed);
    RunConfig rep_config = config;
    rep_config.seed = rep_seed;
    MmlcParameters model = obtain_model(config, dataset, rep_seed);
    for (size_t n = 0; n < config.target_list.size(); ++n) {
      FillReport fill = fill_to_target(model, dataset, config.target_list[n], rep_seed);
      densities[n] = fill.final_density;
      for (size_t m = 0; m < config.methods.size(); ++m)
        accuracies[n][m].push_back(
            *run_method(config.methods[m], fill.filled, rep_config, rep_seed).acc);
    }
  }

  json rows = json::array();
  std::string csv = "n,density,method,mean,std\n";
  for (size_t n = 0; n < config.target_list.size(); ++n) {
    for (size_t m = 0; m < config.methods.size(); ++m) {
      double mean = 0.0;
      for (double a : accuracies[n][m]) mean += a;
      mean /= static_cast<double>(accuracies[n][m].size());
      double std_dev = sample_std(accuracies[n][m], mean);
      rows.push_back(json{{"n", config.target_list[n]},
                          {"density", densities[n]},
                          {"method", config.methods[m]},
                          {"mean", mean},
                          {"std_sample", std_dev},
                          {"runs", accuracies[n][m]},
                          {"seeds", seeds}});
      csv += std::to_string(config.target_list[n]) + "," + format_csv_double(densities[n]) +
             "," + config.methods[m] + "," + format_csv_double(mean) + "," +
             format_csv_double(std_dev) + "\n";
    }
  }
  {
    std::ofstream out(out_dir / "sweep_density.csv");
    if (!out) fail(ErrorCode::Io, "cannot write sweep_density.csv");
    out << csv;
  }
  artifacts.push_back("sweep_density.csv");
  return json{{"rows", rows}, {"csv_file", "sweep_density.csv"}};
}

json cmd_export_projections(const RunConfig& config, const fs::path& out_dir,
                            std::vector<std::string>& artifacts) {
  CrowdDataset dataset = obtain_dataset(config);
  MmlcParameters model = obtain_model(config, dataset, config.model.seed);
  WorkerProjectionMatrix projections = worker_projections(model, dataset);
  std::optional<std::vector<double>> accuracies;
  if (dataset.has_truth()) accuracies = worker_accuracies(dataset);
  export_projections(projections, (out_dir / "projections.csv").string(), accuracies);
  artifacts.push_back("projections.csv");
  return json{{"file", "projections.csv"},
              {"num_workers", dataset.num_workers()},
              {"num_experts", model.config.num_experts},
              {"has_accuracy", dataset.has_truth()}};
}

}  // namespace

RunConfig parse_run_config(const json& config) {
  if (!config.is_object()) fail(ErrorCode::InvalidConfig, "run config must be a JSON object");
  require_keys(config,
               {"features", "labels", "truth", "synth", "method", "methods", "filler",
                "cluster_method", "kde_bandwidth", "model", "model_path", "redundancy_list",
                "target_list", "per_worker_target", "repeats", "seed", "em", "out_dir"},
               "run config");
  RunConfig out;
  try {
    if (config.contains("features")) out.features_path = config["features"].get<std::string>();
    if (config.contains("labels")) out.labels_path = config["labels"].get<std::string>();
    if (config.contains("truth") && !config["truth"].is_null())
      out.truth_path = config["truth"].get<std::string>();
    if (config.contains("synth")) {
      const json& s = config["synth"];
      require_keys(s, {"num_items", "num_workers", "num_classes", "feature_dim", "density",
                       "worker_noise", "seed"}, "synth");
      SynthConfig synth;
      synth.num_items = s.at("num_items").get<int>();
      synth.num_workers = s.at("num_workers").get<int>();
      synth.num_classes = s.at("num_classes").get<int>();
      synth.feature_dim = s.at("feature_dim").get<int>();
      synth.density = s.at("density").get<double>();
      synth.worker_noise = s.value("worker_noise", 0.0);
      synth.seed = s.value("seed", uint64_t{0});
      out.synth = synth;
    }
    if (config.contains("method")) out.method = config["method"].get<std::string>();
    if (config.contains("methods"))
      out.methods = config["methods"].get<std::vector<std::string>>();
    if (config.contains("filler")) out.filler = config["filler"].get<std::string>();
    if (config.contains("cluster_method"))
      out.cluster.kind = parse_cluster_kind(config["cluster_method"].get<std::string>());
    if (config.contains("kde_bandwidth") && !config["kde_bandwidth"].is_null())
      out.cluster.kde_bandwidth = config["kde_bandwidth"].get<double>();
    if (config.contains("seed")) out.seed = config["seed"].get<uint64_t>();
    if (config.contains("model")) {
      const json& m = config["model"];
      require_keys(m, {"num_experts", "expert_layer_sizes", "gate_hidden_size",
                       "output_hidden_size", "lambda", "learning_rate", "batch_size",
                       "epochs", "seed"}, "model");
      out.model.num_experts = m.value("num_experts", out.model.num_experts);
      if (m.contains("expert_layer_sizes"))
        out.model.expert_layer_sizes = m["expert_layer_sizes"].get<std::vector<int>>();
      out.model.gate_hidden_size = m.value("gate_hidden_size", out.model.gate_hidden_size);
      out.model.output_hidden_size = m.value("output_hidden_size", out.model.output_hidden_size);
      out.model.lambda = m.value("lambda", out.model.lambda);
      out.model.learning_rate = m.value("learning_rate", out.model.learning_rate);
      out.model.batch_size = m.value("batch_size", out.model.batch_size);
      out.model.epochs = m.value("epochs", out.model.epochs);
      if (m.contains("seed")) {
        out.model.seed = m["seed"].get<uint64_t>();
        out.model_seed_explicit = true;
      }
    }
    if (config.contains("model_path")) out.model_path = config["model_path"].get<std::string>();
    if (config.contains("redundancy_list"))
      out.redundancy_list = config["redundancy_list"].get<std::vector<int>>();
    if (config.contains("target_list"))
      out.target_list = config["target_list"].get<std::vector<int>>();
    if (config.contains("per_worker_target"))
      out.per_worker_target = config["per_worker_target"].get<int>();
    if (config.contains("repeats")) out.repeats = config["repeats"].get<int>();
    if (config.contains("em")) {
      const json& em = config["em"];
      require_keys(em, {"max_iters", "tol"}, "em");
      out.em_max_iters = em.value("max_iters", out.em_max_iters);
      out.em_tol = em.value("tol", out.em_tol);
    }
    if (config.contains("out_dir")) out.out_dir = config["out_dir"].get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, "run config field error: " + std::string(e.what()));
  }
  if (!out.model_seed_explicit) out.model.seed = out.seed;
  if (out.repeats < 1) fail(ErrorCode::InvalidConfig, "repeats must be >= 1");
  if (out.methods.empty()) fail(ErrorCode::InvalidConfig, "methods must be non-empty");
  return out;
}

json config_to_json(const RunConfig& config) {
  json j;
  j["features"] = config.features_path.has_value() ? json(*config.features_path) : json();
  j["labels"] = config.labels_path.has_value() ? json(*config.labels_path) : json();
  j["truth"] = config.truth_path.has_value() ? json(*config.truth_path) : json();
  if (config.synth.has_value()) {
    j["synth"] = json{{"num_items", config.synth->num_items},
                      {"num_workers", config.synth->num_workers},
                      {"num_classes", config.synth->num_classes},
                      {"feature_dim", config.synth->feature_dim},
                      {"density", config.synth->density},
                      {"worker_noise", config.synth->worker_noise},
                      {"seed", config.synth->seed}};
  } else {
    j["synth"] = json();
  }
  j["method"] = config.method;
  j["methods"] = config.methods;
  j["filler"] = config.filler;
  j["cluster_method"] = cluster_kind_name(config.cluster.kind);
  j["kde_bandwidth"] =
      config.cluster.kde_bandwidth.has_value() ? json(*config.cluster.kde_bandwidth) : json();
  j["model"] = json{{"num_experts", config.model.num_experts},
                    {"expert_layer_sizes", config.model.expert_layer_sizes},
                    {"gate_hidden_size", config.model.gate_hidden_size},
                    {"output_hidden_size", config.model.output_hidden_size},
                    {"lambda", config.model.lambda},
                    {"learning_rate", config.model.learning_rate},
                    {"batch_size", config.model.batch_size},
                    {"epochs", config.model.epochs},
                    {"seed", config.model.seed}};
  j["model_path"] = config.model_path.has_value() ? json(*config.model_path) : json();
  j["redundancy_list"] = config.redundancy_list;
  j["target_list"] = config.target_list;
  j["per_worker_target"] =
      config.per_worker_target.has_value() ? json(*config.per_worker_target) : json();
  j["repeats"] = config.repeats;
  j["seed"] = config.seed;
  j["em"] = json{{"max_iters", config.em_max_iters}, {"tol", config.em_tol}};
  j["out_dir"] = config.out_dir;
  return j;
}

json run_command(const std::string& command, const RunConfig& config) {
  auto started = std::chrono::steady_clock::now();
  fs::path out_dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory " + config.out_dir);

  std::vector<std::string> artifacts{"report.json"};
  json results;
  if (command == "synth") results = cmd_synth(config, out_dir, artifacts);
  else if (command == "infer") results = cmd_infer(config, out_dir, artifacts);
  else if (command == "train") results = cmd_train(config, out_dir, artifacts);
  else if (command == "owf") results = cmd_owf(config, out_dir, artifacts);
  else if (command == "fill") results = cmd_fill(config, out_dir, artifacts);
  else if (command == "fill-infer") results = cmd_fill_infer(config, out_dir, artifacts);
  else if (command == "sweep-redundancy") results = cmd_sweep_redundancy(config, out_dir, artifacts);
  else if (command == "sweep-density") results = cmd_sweep_density(config, out_dir, artifacts);
  else if (command == "export-projections") results = cmd_export_projections(config, out_dir, artifacts);
  else fail(ErrorCode::UnknownMethod, "unknown command '" + command + "'");

  json report;
  report["schema_version"] = 1;
  report["command"] = command;
  report["config"] = config_to_json(config);
  report["artifacts"] = artifacts;
  report["results"] = results;
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report["timing"] = json{{"total_seconds", seconds}};

  std::ofstream out(out_dir / "report.json");
  if (!out) fail(ErrorCode::Io, "cannot write report.json");
  out << report.dump(2) << "\n";
  return report;
}

}  // namespace mmlc::harness
