#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "model.hpp"
#include "spectral.hpp"
#include "synth.hpp"

namespace mmlc::harness {

// Fully resolved experiment configuration. Every report embeds its JSON
// form, which together with the base seed reproduces the run exactly
// (per-repeat seeds are base seed + repeat index).
struct RunConfig {
  std::optional<std::string> features_path;
  std::optional<std::string> labels_path;
  std::optional<std::string> truth_path;
  std::optional<SynthConfig> synth;

  std::string method = "mv";
  std::vector<std::string> methods = {"mv", "ds", "fds", "hds"};
  std::string filler = "mmlc-df";
  ClusterMethod cluster;
  MmlcConfig model;
  bool model_seed_explicit = false;
  std::optional<std::string> model_path;

  std::vector<int> redundancy_list;
  std::vector<int> target_list;
  std::optional<int> per_worker_target;

  int repeats = 5;
  uint64_t seed = 42;
  int em_max_iters = 100;
  double em_tol = 1e-6;
  std::string out_dir = "out";
};

// Parses and validates the JSON form; unknown keys are rejected. Absent
// model.seed resolves to the run seed.
RunConfig parse_run_config(const nlohmann::json& config);

nlohmann::json config_to_json(const RunConfig& config);

// Commands: synth, infer, train, owf, fill, fill-infer, sweep-redundancy,
// sweep-density, export-projections. Writes report.json plus any artifacts
// into config.out_dir and returns the report. Reports are byte-stable for
// a fixed config apart from the "timing" object.
nlohmann::json run_command(const std::string& command, const RunConfig& config);

}  // namespace mmlc::harness
