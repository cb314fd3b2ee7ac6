#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "baselines.hpp"
#include "filling.hpp"
#include "harness.hpp"
#include "support/schema_validator.hpp"
#include "support/test_util.hpp"

using namespace mmlc;
using nlohmann::json;
using testutil::TempDir;

namespace {

json synth_json(uint64_t seed, int items = 30, int workers = 5, double density = 0.5) {
  return json{{"num_items", items},   {"num_workers", workers}, {"num_classes", 3},
              {"feature_dim", 4},     {"density", density},     {"worker_noise", 0.2},
              {"seed", seed}};
}

json small_model_json(int epochs = 8) {
  return json{{"num_experts", 2},       {"expert_layer_sizes", json::array({8, 4})},
              {"gate_hidden_size", 4},  {"output_hidden_size", 8},
              {"lambda", 1e-3},         {"learning_rate", 5e-3},
              {"batch_size", 16},       {"epochs", epochs}};
}

json strip_timing(json report) {
  report.erase("timing");
  return report;
}

json schema() {
  std::ifstream in(MMLC_SCHEMA_PATH);
  REQUIRE(in.good());
  json s;
  in >> s;
  return s;
}

TempDir write_unanimous_fixture() {
  TempDir dir;
  testutil::write_file(dir.file("features.csv"),
                       "item_id,f0,f1\na,1,2\nb,3,4\nc,5,6\n");
  testutil::write_file(dir.file("labels.csv"),
                       "item_id,worker_id,label\n"
                       "a,w1,cat\na,w2,cat\nb,w1,dog\nb,w2,dog\nc,w1,cat\nc,w2,cat\n");
  testutil::write_file(dir.file("truth.csv"), "item_id,label\na,cat\nb,dog\nc,cat\n");
  return dir;
}

}  // namespace

TEST_CASE("config parsing validates and resolves defaults") {
  harness::RunConfig config = harness::parse_run_config(json{{"seed", 9}});
  CHECK(config.seed == 9);
  CHECK(config.model.seed == 9);  // inherits the run seed
  CHECK(config.repeats == 5);
  CHECK(config.method == "mv");

  harness::RunConfig explicit_seed = harness::parse_run_config(
      json{{"seed", 9}, {"model", {{"seed", 33}}}});
  CHECK(explicit_seed.model.seed == 33);

  CHECK_THROWS_AS(harness::parse_run_config(json{{"not_a_key", 1}}), Error);
  CHECK_THROWS_AS(harness::parse_run_config(json{{"repeats", 0}}), Error);
  CHECK_THROWS_AS(harness::parse_run_config(json{{"methods", json::array()}}), Error);
}

TEST_CASE("synth command writes a reloadable dataset and manifest") {
  TempDir dir;
  harness::RunConfig config = harness::parse_run_config(
      json{{"synth", synth_json(4)}, {"out_dir", dir.file("out")}});
  json report = harness::run_command("synth", config);

  CHECK(report["command"] == "synth");
  CrowdDataset reloaded = load_dataset(dir.file("out/features.csv"), dir.file("out/labels.csv"),
                                       dir.file("out/truth.csv"));
  CHECK(reloaded.num_items() == 30);
  CHECK(reloaded.num_workers() == 5);
  CHECK(reloaded.has_truth());

  const json& oracle = report["results"]["manifest"]["oracle_projection"];
  double sum = 0.0;
  for (const auto& v : oracle) sum += v.get<double>();
  CHECK(std::abs(sum - 1.0) < 1e-9);

  std::ifstream manifest(dir.file("out/manifest.json"));
  CHECK(manifest.good());

  // Same seed, second run: byte-identical dataset files.
  TempDir dir2;
  harness::RunConfig config2 = harness::parse_run_config(
      json{{"synth", synth_json(4)}, {"out_dir", dir2.file("out")}});
  harness::run_command("synth", config2);
  CHECK(testutil::read_file(dir.file("out/labels.csv")) ==
        testutil::read_file(dir2.file("out/labels.csv")));
  CHECK(testutil::read_file(dir.file("out/features.csv")) ==
        testutil::read_file(dir2.file("out/features.csv")));
}

TEST_CASE("infer reports accuracy on a unanimous fixture") {
  TempDir fixture = write_unanimous_fixture();
  TempDir out;
  harness::RunConfig config = harness::parse_run_config(
      json{{"features", fixture.file("features.csv")},
           {"labels", fixture.file("labels.csv")},
           {"truth", fixture.file("truth.csv")},
           {"method", "mv"},
           {"out_dir", out.file("out")}});
  json report = harness::run_command("infer", config);
  CHECK(report["results"]["accuracy"] == 1.0);
  CHECK(report["results"]["labels"]["a"] == "cat");
  CHECK(report["results"]["labels"]["b"] == "dog");

  std::ifstream written(out.file("out/report.json"));
  REQUIRE(written.good());
  json on_disk;
  written >> on_disk;
  CHECK(strip_timing(on_disk) == strip_timing(report));
}

TEST_CASE("unknown methods and commands are domain errors") {
  TempDir out;
  harness::RunConfig config = harness::parse_run_config(
      json{{"synth", synth_json(1)}, {"method", "bogus"}, {"out_dir", out.file("out")}});
  try {
    harness::run_command("infer", config);
    FAIL("expected UnknownMethod");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownMethod);
  }
  try {
    harness::run_command("frobnicate", config);
    FAIL("expected UnknownMethod");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownMethod);
  }
}

TEST_CASE("reports are byte-stable apart from timing") {
  TempDir out;
  json config_json{{"synth", synth_json(7)},
                   {"method", "mmlc-owf"},
                   {"model", small_model_json()},
                   {"cluster_method", "kde"},
                   {"seed", 11},
                   {"out_dir", out.file("out")}};
  json a = harness::run_command("infer", harness::parse_run_config(config_json));
  json b = harness::run_command("infer", harness::parse_run_config(config_json));
  CHECK(strip_timing(a).dump() == strip_timing(b).dump());
  CHECK(a["results"].contains("v_oracle"));
  CHECK(a["results"]["method"] == "mmlc-owf");
}

TEST_CASE("every command's report validates against the shipped schema") {
  json s = schema();
  TempDir out;
  json base{{"synth", synth_json(3)},
            {"model", small_model_json(4)},
            {"seed", 5},
            {"repeats", 2},
            {"out_dir", out.file("out")}};

  auto check_report = [&](const std::string& command, json extra) {
    json config_json = base;
    for (auto it = extra.begin(); it != extra.end(); ++it) config_json[it.key()] = it.value();
    json report = harness::run_command(command, harness::parse_run_config(config_json));
    std::vector<std::string> violations = testutil::schema_violations(s, report);
    for (const std::string& v : violations) MESSAGE(command, ": ", v);
    CHECK(violations.empty());
  };

  check_report("synth", {});
  check_report("infer", json{{"method", "ds"}});
  check_report("train", {});
  check_report("owf", {});
  check_report("fill", json{{"filler", "gmv"}});
  check_report("fill-infer", json{{"filler", "gmv"}, {"method", "mv"}});
  check_report("sweep-redundancy", json{{"redundancy_list", json::array({1, 2})},
                                        {"methods", json::array({"mv", "hds"})}});
  check_report("sweep-density", json{{"target_list", json::array({0, 30})},
                                     {"methods", json::array({"mv"})}});
  check_report("export-projections", {});
}

TEST_CASE("fill-infer on dense data has delta zero and exact arithmetic") {
  TempDir out;
  json config_json{{"synth", synth_json(13, 20, 4, 1.0)},
                   {"model", small_model_json(4)},
                   {"method", "mv"},
                   {"filler", "mmlc-df"},
                   {"out_dir", out.file("out")}};
  json report = harness::run_command("fill-infer", harness::parse_run_config(config_json));
  CHECK(report["results"]["delta"].get<double>() == 0.0);
  CHECK(report["results"]["fill"]["num_filled"] == 0);

  TempDir out2;
  json sparse = config_json;
  sparse["synth"] = synth_json(13, 20, 4, 0.4);
  sparse["out_dir"] = out2.file("out");
  json sparse_report = harness::run_command("fill-infer", harness::parse_run_config(sparse));
  double original = sparse_report["results"]["original"]["accuracy"].get<double>();
  double filled = sparse_report["results"]["filled"]["accuracy"].get<double>();
  CHECK(sparse_report["results"]["delta"].get<double>() ==
        doctest::Approx(filled - original).epsilon(1e-15));
}

TEST_CASE("redundancy sweep rows are consistent and capped runs match uncapped") {
  TempDir out;
  json config_json{{"synth", synth_json(17, 24, 4, 0.5)},
                   {"methods", json::array({"mv", "hds"})},
                   {"redundancy_list", json::array({99, 2})},
                   {"repeats", 3},
                   {"seed", 21},
                   {"out_dir", out.file("out")}};
  json report = harness::run_command("sweep-redundancy",
                                     harness::parse_run_config(config_json));
  const json& rows = report["results"]["rows"];
  CHECK(rows.size() == 4);  // |R list| x |methods|

  // R = 99 exceeds every per-item count, so all repeats equal the uncapped run.
  harness::RunConfig direct_config = harness::parse_run_config(config_json);
  CrowdDataset ds = synth_generate(*direct_config.synth).dataset;
  double mv_acc = accuracy(mv_infer(ds), ds.truth());
  for (const json& row : rows) {
    double mean = row["mean"].get<double>();
    const json& runs = row["runs"];
    double total = 0.0;
    for (const auto& r : runs) total += r.get<double>();
    CHECK(mean == doctest::Approx(total / runs.size()).epsilon(1e-12));
    double sq = 0.0;
    for (const auto& r : runs) sq += std::pow(r.get<double>() - mean, 2);
    double expected_std = runs.size() > 1 ? std::sqrt(sq / (runs.size() - 1)) : 0.0;
    CHECK(row["std_sample"].get<double>() == doctest::Approx(expected_std).epsilon(1e-12));
    if (row["R"] == 99 && row["method"] == "mv") {
      for (const auto& r : runs) CHECK(r.get<double>() == mv_acc);
    }
  }

  std::string csv = testutil::read_file(out.file("out/sweep_redundancy.csv"));
  CHECK(csv.rfind("R,method,mean,std\n", 0) == 0);
}

TEST_CASE("density sweep starts at the original data and ends at full fill") {
  TempDir out;
  json config_json{{"synth", synth_json(19, 25, 5, 0.4)},
                   {"methods", json::array({"mv"})},
                   {"target_list", json::array({0, 10, 25})},
                   {"model", small_model_json(6)},
                   {"repeats", 1},
                   {"seed", 33},
                   {"out_dir", out.file("out")}};
  harness::RunConfig config = harness::parse_run_config(config_json);
  json report = harness::run_command("sweep-density", config);
  const json& rows = report["results"]["rows"];
  REQUIRE(rows.size() == 3);

  CrowdDataset ds = synth_generate(*config.synth).dataset;
  CHECK(rows[0]["n"] == 0);
  CHECK(rows[0]["density"].get<double>() == density(ds));
  CHECK(rows[0]["mean"].get<double>() == accuracy(mv_infer(ds), ds.truth()));

  double prev = 0.0;
  for (const json& row : rows) {
    CHECK(row["density"].get<double>() >= prev);
    prev = row["density"].get<double>();
  }
  CHECK(rows[2]["density"].get<double>() == 1.0);

  // The max-n row equals a full fill with the same per-repeat model seed.
  MmlcConfig mc = config.model;
  mc.feature_dim = ds.feature_dim();
  mc.num_workers = ds.num_workers();
  mc.num_classes = ds.num_classes();
  mc.seed = config.seed;  // repeat 0 seed
  MmlcParameters model = init_model(mc);
  model.worker_ids = ds.worker_ids();
  auto [trained, log] = train(std::move(model), ds);
  double full_acc = accuracy(mv_infer(fill_full(trained, ds).filled), ds.truth());
  CHECK(rows[2]["mean"].get<double>() == doctest::Approx(full_acc).epsilon(1e-12));
}

TEST_CASE("train writes a loadable checkpoint") {
  TempDir out;
  json config_json{{"synth", synth_json(23)},
                   {"model", small_model_json(5)},
                   {"out_dir", out.file("out")}};
  json report = harness::run_command("train", harness::parse_run_config(config_json));
  CHECK(report["results"]["epoch_mean_loss"].size() == 5);
  MmlcParameters model = load_model(out.file("out/model.json"));
  CHECK(model.config.epochs == 5);
  CHECK(model.worker_ids.size() == 5);

  // A loaded checkpoint feeds owf without retraining.
  TempDir out2;
  json owf_json{{"synth", synth_json(23)},
                {"model_path", out.file("out/model.json")},
                {"out_dir", out2.file("out")}};
  json owf_report = harness::run_command("owf", harness::parse_run_config(owf_json));
  CHECK(owf_report["results"]["method"] == "mmlc-owf");
}

TEST_CASE("export-projections writes one row per worker") {
  TempDir out;
  json config_json{{"synth", synth_json(29)},
                   {"model", small_model_json(4)},
                   {"out_dir", out.file("out")}};
  json report = harness::run_command("export-projections",
                                     harness::parse_run_config(config_json));
  CHECK(report["results"]["num_workers"] == 5);
  std::string csv = testutil::read_file(out.file("out/projections.csv"));
  CHECK(csv.rfind("worker_id,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 5 workers
  CHECK(csv.find(",accuracy") != std::string::npos);     // synth data carries truth
}
