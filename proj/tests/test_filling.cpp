#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <tuple>

#include "baselines.hpp"
#include "filling.hpp"
#include "rng.hpp"
#include "support/fixtures.hpp"
#include "synth.hpp"

using namespace mmlc;

namespace {

struct Setup {
  CrowdDataset dataset;
  MmlcParameters model;
};

Setup sparse_setup(uint64_t seed, double density = 0.4) {
  SynthConfig config;
  config.num_items = 25;
  config.num_workers = 6;
  config.num_classes = 3;
  config.feature_dim = 5;
  config.density = density;
  config.worker_noise = 0.2;
  config.seed = seed;
  CrowdDataset dataset = synth_generate(config).dataset;

  MmlcConfig mc;
  mc.num_experts = 2;
  mc.expert_layer_sizes = {8, 4};
  mc.gate_hidden_size = 4;
  mc.output_hidden_size = 8;
  mc.epochs = 10;
  mc.learning_rate = 5e-3;
  mc.batch_size = 16;
  mc.seed = seed;
  mc.feature_dim = dataset.feature_dim();
  mc.num_workers = dataset.num_workers();
  mc.num_classes = dataset.num_classes();
  MmlcParameters model = init_model(mc);
  model.worker_ids = dataset.worker_ids();
  auto [trained, log] = train(std::move(model), dataset);
  return {std::move(dataset), std::move(trained)};
}

using TripleKey = std::tuple<int, int, int>;

std::set<TripleKey> triple_set(const CrowdDataset& ds) {
  std::set<TripleKey> keys;
  for (const LabelTriple& t : ds.labels()) keys.insert({t.item, t.worker, t.label});
  return keys;
}

}  // namespace

TEST_CASE("fill_full reaches density one and preserves the originals") {
  Setup s = sparse_setup(1);
  FillReport report = fill_full(s.model, s.dataset);

  CHECK(report.final_density == 1.0);
  CHECK(density(report.filled) == 1.0);
  CHECK(report.filled.num_labels() == s.dataset.num_items() * s.dataset.num_workers());
  CHECK(report.num_original == s.dataset.num_labels());
  CHECK(report.num_original + report.num_filled == report.filled.num_labels());
  CHECK(report.filler == "mmlc-df");

  // Original triples appear unchanged, in order, with Original provenance.
  for (int t = 0; t < s.dataset.num_labels(); ++t) {
    CHECK(report.filled.labels()[t] == s.dataset.labels()[t]);
    CHECK(report.filled.labels()[t].provenance == Provenance::Original);
  }
  for (int t = s.dataset.num_labels(); t < report.filled.num_labels(); ++t)
    CHECK(report.filled.labels()[t].provenance == Provenance::Filled);

  // Filled labels are exactly the predict_missing outputs.
  std::vector<MissingPrediction> preds = predict_missing(s.model, s.dataset);
  REQUIRE(static_cast<int>(preds.size()) == report.num_filled);
  for (size_t p = 0; p < preds.size(); ++p) {
    const LabelTriple& t = report.filled.labels()[s.dataset.num_labels() + p];
    CHECK(t.item == preds[p].item);
    CHECK(t.worker == preds[p].worker);
    CHECK(t.label == preds[p].label);
  }
}

TEST_CASE("fill_to_target boundary targets") {
  Setup s = sparse_setup(2);

  FillReport none = fill_to_target(s.model, s.dataset, 0, 77);
  CHECK(none.num_filled == 0);
  CHECK(none.filled.same_content(s.dataset));

  FillReport all = fill_to_target(s.model, s.dataset, s.dataset.num_items(), 77);
  CHECK(all.final_density == 1.0);
  CHECK(all.filled.same_content(fill_full(s.model, s.dataset).filled));
}

TEST_CASE("fill_to_target raises low workers to the target") {
  // 4 items; worker w1 has one label, target 3 -> exactly 2 filled triples.
  std::vector<std::string> items{"a", "b", "c", "d"};
  std::vector<LabelTriple> triples = {
      {0, 0, 0}, {1, 0, 1}, {2, 0, 0}, {3, 0, 1}, {1, 1, 1}};
  CrowdDataset ds = CrowdDataset::create(items, Eigen::MatrixXd::Random(3, 4), {"w0", "w1"},
                                         {"x", "y"}, triples);
  MmlcConfig mc;
  mc.num_experts = 2;
  mc.expert_layer_sizes = {4};
  mc.gate_hidden_size = 2;
  mc.output_hidden_size = 4;
  mc.epochs = 0;
  mc.feature_dim = 3;
  mc.num_workers = 2;
  mc.num_classes = 2;
  MmlcParameters model = init_model(mc);
  model.worker_ids = ds.worker_ids();

  FillReport report = fill_to_target(model, ds, 3, 5);
  CHECK(report.num_filled == 2);
  int w1_count = 0;
  for (const LabelTriple& t : report.filled.labels())
    if (t.worker == 1) ++w1_count;
  CHECK(w1_count == 3);

  FillReport again = fill_to_target(model, ds, 3, 5);
  CHECK(again.filled.same_content(report.filled));
}

TEST_CASE("fill sets are nested across targets for a shared seed") {
  Setup s = sparse_setup(3, 0.3);
  std::set<TripleKey> previous;
  double prev_density = 0.0;
  for (int target : {0, 3, 7, 12, 18, 25}) {
    FillReport report = fill_to_target(s.model, s.dataset, target, 99);
    std::set<TripleKey> current = triple_set(report.filled);
    for (const TripleKey& key : previous) CHECK(current.count(key) == 1);
    CHECK(report.final_density >= prev_density);
    prev_density = report.final_density;
    previous = std::move(current);
  }
}

TEST_CASE("every filler keeps the input triples and partitions provenance") {
  Setup s = sparse_setup(4);
  std::set<TripleKey> original = triple_set(s.dataset);
  for (const FillReport& report :
       {fill_full(s.model, s.dataset), fill_to_target(s.model, s.dataset, 10, 3),
        gmv_fill(s.dataset, 3)}) {
    std::set<TripleKey> filled = triple_set(report.filled);
    for (const TripleKey& key : original) CHECK(filled.count(key) == 1);
    int orig_count = 0;
    int fill_count = 0;
    for (const LabelTriple& t : report.filled.labels()) {
      if (t.provenance == Provenance::Original) {
        ++orig_count;
        CHECK(original.count({t.item, t.worker, t.label}) == 1);
      } else {
        ++fill_count;
      }
    }
    CHECK(orig_count == report.num_original);
    CHECK(fill_count == report.num_filled);
  }
}

TEST_CASE("filling a dense dataset is a no-op for inference") {
  Setup s = sparse_setup(5, 1.0);
  REQUIRE(density(s.dataset) == 1.0);
  FillReport report = fill_full(s.model, s.dataset);
  CHECK(report.num_filled == 0);
  InferenceResult before = mv_infer(s.dataset);
  InferenceResult after = mv_infer(report.filled);
  CHECK(before.labels == after.labels);
  EmOutcome ds_before = ds_infer(s.dataset);
  EmOutcome ds_after = ds_infer(report.filled);
  CHECK(ds_before.result.labels == ds_after.result.labels);
}

TEST_CASE("gmv fill is seeded and deterministic") {
  Rng rng(6);
  CrowdDataset ds = testutil::random_dataset(rng, 10, 5, 4);
  FillReport a = gmv_fill(ds, 42);
  FillReport b = gmv_fill(ds, 42);
  CHECK(a.filled.same_content(b.filled));
  CHECK(a.filler == "gmv");
  CHECK(a.final_density == 1.0);
}

TEST_CASE("gmv fill matches the stated sampling law") {
  // Worker w0 answers 8 items agreeing with MV on 6: ability (6+1)/(8+2) = 0.7.
  // Workers w1, w2 agree everywhere and pin the MV label to item parity.
  const int kProbe = 10000;
  const int items = kProbe + 8;
  std::vector<std::string> item_ids(items);
  for (int i = 0; i < items; ++i) item_ids[i] = "i" + std::to_string(i);
  std::vector<LabelTriple> triples;
  for (int i = 0; i < items; ++i) {
    int mv_label = i % 2;
    triples.push_back({i, 1, mv_label});
    triples.push_back({i, 2, mv_label});
  }
  for (int i = kProbe; i < kProbe + 8; ++i) {
    int mv_label = i % 2;
    int w0_label = (i < kProbe + 6) ? mv_label : (mv_label + 2);  // 6 agree, 2 disagree
    triples.push_back({i, 0, w0_label});
  }
  CrowdDataset ds =
      CrowdDataset::create(item_ids, Eigen::MatrixXd::Zero(1, items), {"w0", "w1", "w2"},
                           {"c0", "c1", "c2", "c3"}, triples);

  InferenceResult mv = mv_infer(ds);
  FillReport report = gmv_fill(ds, 2024);
  int agree = 0;
  int w0_filled = 0;
  for (const LabelTriple& t : report.filled.labels()) {
    if (t.provenance != Provenance::Filled || t.worker != 0) continue;
    ++w0_filled;
    if (t.label == mv.labels[t.item]) ++agree;
  }
  CHECK(w0_filled == kProbe);
  double frequency = static_cast<double>(agree) / w0_filled;
  CHECK(frequency == doctest::Approx(0.7).epsilon(0.03));
  CHECK(std::abs(frequency - 0.7) < 0.02);
}
