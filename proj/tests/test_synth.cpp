#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "baselines.hpp"
#include "synth.hpp"

using namespace mmlc;

TEST_CASE("zero worker noise collapses every worker onto the oracle") {
  SynthConfig config;
  config.num_items = 15;
  config.num_workers = 6;
  config.num_classes = 4;
  config.feature_dim = 5;
  config.density = 1.0;
  config.worker_noise = 0.0;
  config.seed = 3;
  SynthResult synth = synth_generate(config);

  for (int j = 0; j < config.num_workers; ++j)
    CHECK((synth.worker_projections.row(j).transpose() - synth.oracle_projection).norm() <
          1e-12);

  // Every worker's label distribution is the oracle's own distribution, so
  // each item's distribution argmax equals the truth.
  for (int i = 0; i < config.num_items; ++i) {
    Eigen::VectorXd dist = forward_with_projection(
        synth.generator, synth.dataset.feature(i),
        synth.worker_projections.row(0).transpose());
    int best = 0;
    for (int k = 1; k < dist.size(); ++k)
      if (dist[k] > dist[best]) best = k;
    CHECK(best == synth.dataset.truth()[i]);
  }
}

TEST_CASE("density 1 labels the full grid") {
  SynthConfig config;
  config.num_items = 9;
  config.num_workers = 5;
  config.num_classes = 3;
  config.feature_dim = 4;
  config.density = 1.0;
  config.worker_noise = 0.3;
  config.seed = 11;
  CrowdDataset ds = synth_generate(config).dataset;
  CHECK(ds.num_labels() == 45);
  CHECK(density(ds) == 1.0);
}

TEST_CASE("partial density hits the target and covers every item") {
  SynthConfig config;
  config.num_items = 40;
  config.num_workers = 10;
  config.num_classes = 4;
  config.feature_dim = 4;
  config.density = 0.3;
  config.worker_noise = 0.2;
  config.seed = 21;
  CrowdDataset ds = synth_generate(config).dataset;
  CHECK(ds.num_labels() == 120);  // 0.3 * 400
  for (int i = 0; i < ds.num_items(); ++i) CHECK(ds.labels_of_item(i).size() >= 1);
}

TEST_CASE("generation is bit-identical for a fixed seed") {
  SynthConfig config;
  config.num_items = 12;
  config.num_workers = 4;
  config.num_classes = 3;
  config.feature_dim = 6;
  config.density = 0.6;
  config.worker_noise = 0.4;
  config.seed = 123;
  SynthResult a = synth_generate(config);
  SynthResult b = synth_generate(config);
  CHECK(a.dataset.features() == b.dataset.features());
  CHECK(a.dataset.same_content(b.dataset));
  CHECK(a.oracle_projection == b.oracle_projection);
  CHECK(a.worker_projections == b.worker_projections);

  SynthConfig other = config;
  other.seed = 124;
  CHECK_FALSE(synth_generate(other).dataset.same_content(a.dataset));
}

TEST_CASE("oracle projection lies on the simplex") {
  for (uint64_t seed : {1, 2, 3}) {
    SynthConfig config;
    config.num_items = 5;
    config.num_workers = 3;
    config.num_classes = 3;
    config.feature_dim = 3;
    config.density = 1.0;
    config.worker_noise = 0.5;
    config.seed = seed;
    SynthResult synth = synth_generate(config);
    CHECK(std::abs(synth.oracle_projection.sum() - 1.0) < 1e-12);
    CHECK(synth.oracle_projection.minCoeff() >= 0.0);
    for (int j = 0; j < config.num_workers; ++j)
      CHECK(std::abs(synth.worker_projections.row(j).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("mv beats every single worker when all workers are oracles") {
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    SynthConfig config;
    config.num_items = 50;
    config.num_workers = 10;
    config.num_classes = 4;
    config.feature_dim = 6;
    config.density = 1.0;
    config.worker_noise = 0.0;
    config.seed = seed;
    CrowdDataset ds = synth_generate(config).dataset;

    double mv_acc = accuracy(mv_infer(ds), ds.truth());
    for (int j = 0; j < ds.num_workers(); ++j) {
      int correct = 0;
      for (int t : ds.labels_of_worker(j)) {
        const LabelTriple& triple = ds.labels()[t];
        if (triple.label == ds.truth()[triple.item]) ++correct;
      }
      double worker_acc = static_cast<double>(correct) / ds.num_items();
      CHECK(mv_acc >= worker_acc);
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig config;
  config.num_items = 10;
  config.num_workers = 5;
  config.num_classes = 3;
  config.feature_dim = 4;
  config.density = 0.0;
  CHECK_THROWS_AS(synth_generate(config), Error);
  config.density = 1.5;
  CHECK_THROWS_AS(synth_generate(config), Error);
  config.density = 0.5;
  config.worker_noise = -0.1;
  CHECK_THROWS_AS(synth_generate(config), Error);
  config.worker_noise = 0.0;
  config.num_items = 0;
  CHECK_THROWS_AS(synth_generate(config), Error);
}
