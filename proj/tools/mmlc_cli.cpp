// Command-line front end. All domain work happens behind the C API in
// libmmlc; this binary only assembles run configs and reports outcomes.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmlc/mmlc.h"

namespace {

using nlohmann::json;

struct CliOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> repeats;
  std::optional<std::string> features;
  std::optional<std::string> labels;
  std::optional<std::string> truth;
  std::optional<std::string> method;
  std::optional<std::string> filler;
  std::optional<std::string> cluster;
  std::optional<std::string> model_path;
};

int usage_error(const std::string& message) {
  json err{{"error", {{"code", "UsageError"}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  return 2;
}

int run(const std::string& command, const CliOptions& options) {
  json config = json::object();
  if (!options.config_path.empty()) {
    std::ifstream in(options.config_path);
    if (!in) return usage_error("cannot open config file " + options.config_path);
    try {
      in >> config;
    } catch (const json::exception& e) {
      return usage_error("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!config.is_object()) return usage_error("config file must hold a JSON object");
  }
  if (options.seed.has_value()) config["seed"] = *options.seed;
  if (options.out_dir.has_value()) config["out_dir"] = *options.out_dir;
  if (options.repeats.has_value()) config["repeats"] = *options.repeats;
  if (options.features.has_value()) config["features"] = *options.features;
  if (options.labels.has_value()) config["labels"] = *options.labels;
  if (options.truth.has_value()) config["truth"] = *options.truth;
  if (options.method.has_value()) config["method"] = *options.method;
  if (options.filler.has_value()) config["filler"] = *options.filler;
  if (options.cluster.has_value()) config["cluster_method"] = *options.cluster;
  if (options.model_path.has_value()) config["model_path"] = *options.model_path;

  char* report_json = nullptr;
  mmlc_status status = mmlc_run(command.c_str(), config.dump().c_str(), &report_json);
  if (status != MMLC_OK) {
    json err{{"error",
              {{"code", mmlc_status_name(status)}, {"message", mmlc_last_error_message()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  json report = json::parse(report_json);
  mmlc_string_free(report_json);
  std::string out_dir = report["config"]["out_dir"].get<std::string>();
  std::cout << "wrote " << out_dir << "/report.json";
  const json& results = report["results"];
  if (results.contains("accuracy"))
    std::cout << "  accuracy " << results["accuracy"].get<double>();
  if (results.contains("delta")) std::cout << "  delta " << results["delta"].get<double>();
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmlc: truth inference for crowdsourced labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mmlc_version()));

  CliOptions options;
  std::string command;
  const std::vector<std::string> commands = {
      "synth",          "infer", "train",      "owf",
      "fill",           "fill-infer", "sweep-redundancy", "sweep-density",
      "export-projections"};
  const std::vector<std::string> descriptions = {
      "generate a synthetic dataset with known truth",
      "run a truth-inference method (mv, ds, fds, hds, mmlc-owf)",
      "train the worker behavior model and save a checkpoint",
      "oracle-worker-finding inference",
      "complete a sparse dataset (mmlc-df or gmv)",
      "compare a method before and after filling",
      "accuracy sweep over redundancy caps",
      "accuracy sweep over fill targets",
      "export worker projections to CSV"};

  for (size_t c = 0; c < commands.size(); ++c) {
    CLI::App* sub = app.add_subcommand(commands[c], descriptions[c]);
    sub->add_option("--config", options.config_path, "run config JSON file");
    sub->add_option("--seed", options.seed, "base seed");
    sub->add_option("--out-dir", options.out_dir, "output directory");
    sub->add_option("--repeats", options.repeats, "repeat count for sweeps");
    sub->add_option("--features", options.features, "features.csv path");
    sub->add_option("--labels", options.labels, "labels.csv path");
    sub->add_option("--truth", options.truth, "truth.csv path");
    sub->add_option("--method", options.method, "inference method");
    sub->add_option("--filler", options.filler, "filler (mmlc-df or gmv)");
    sub->add_option("--cluster", options.cluster, "cluster method for owf");
    sub->add_option("--model-path", options.model_path, "load a model checkpoint");
    sub->callback([&command, name = commands[c]] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return run(command, options);
}
