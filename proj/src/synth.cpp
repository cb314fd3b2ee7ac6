#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numeric.hpp"
#include "rng.hpp"

namespace mmlc {

namespace {

// Generator architecture. The gains sharpen the class distributions so
// oracle labels carry signal; the gate of the generator is unused (worker
// projections are drawn explicitly).
constexpr int kGenExperts = 4;
constexpr int kGenExpertHidden = 16;
constexpr int kGenSpectralDim = 8;
constexpr double kGenExpertGain = 1.2;
constexpr double kGenOutputGain = 30.0;

Eigen::VectorXd dirichlet_uniform(int size, Rng& rng) {
  Eigen::VectorXd v(size);
  for (int e = 0; e < size; ++e) {
    double u = static_cast<double>((rng.next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    v[e] = -std::log(u);
  }
  return v / v.sum();
}

int sample_categorical(const Eigen::VectorXd& dist, Rng& rng) {
  double u = rng.next_double();
  double acc = 0.0;
  for (int k = 0; k < dist.size(); ++k) {
    acc += dist[k];
    if (u < acc) return k;
  }
  return static_cast<int>(dist.size()) - 1;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_items < 1 || num_workers < 1 || num_classes < 1 || feature_dim < 1)
    fail(ErrorCode::InvalidConfig, "synth sizes must be positive");
  if (density <= 0.0 || density > 1.0)
    fail(ErrorCode::InvalidConfig, "density must lie in (0, 1]");
  if (worker_noise < 0.0) fail(ErrorCode::InvalidConfig, "worker_noise must be >= 0");
  if (density * num_items * num_workers < 1.0)
    fail(ErrorCode::InvalidConfig, "density * num_items * num_workers must be >= 1");
}

SynthResult synth_generate(const SynthConfig& config) {
  config.validate();
  Rng root(config.seed);

  // Frozen generating model.
  MmlcConfig gen_config;
  gen_config.num_experts = kGenExperts;
  gen_config.expert_layer_sizes = {kGenExpertHidden, kGenSpectralDim};
  gen_config.gate_hidden_size = 4;
  gen_config.output_hidden_size = 16;
  gen_config.feature_dim = config.feature_dim;
  gen_config.num_workers = config.num_workers;
  gen_config.num_classes = config.num_classes;
  gen_config.seed = root.fork("generator-init").next_u64();
  MmlcParameters generator = init_model(gen_config);
  for (std::vector<Linear>& stack : generator.experts)
    for (Linear& layer : stack) layer.weight *= kGenExpertGain;
  generator.output_hidden.weight *= kGenExpertGain;
  generator.output_final.weight *= kGenOutputGain;

  // Item features.
  Rng feature_rng = root.fork("features");
  Eigen::MatrixXd features(config.feature_dim, config.num_items);
  for (int i = 0; i < config.num_items; ++i)
    for (int f = 0; f < config.feature_dim; ++f) features(f, i) = feature_rng.next_gaussian();

  // Oracle and worker projections.
  Rng oracle_rng = root.fork("oracle");
  Eigen::VectorXd oracle = dirichlet_uniform(kGenExperts, oracle_rng);
  Rng worker_rng = root.fork("workers");
  Eigen::MatrixXd worker_projections(config.num_workers, kGenExperts);
  for (int j = 0; j < config.num_workers; ++j) {
    Eigen::VectorXd v(kGenExperts);
    for (int e = 0; e < kGenExperts; ++e)
      v[e] = oracle[e] * std::exp(config.worker_noise * worker_rng.next_gaussian());
    worker_projections.row(j) = (v / v.sum()).transpose();
  }

  // Ground truth from the oracle projection.
  std::vector<int> truth(config.num_items);
  for (int i = 0; i < config.num_items; ++i)
    truth[i] = argmax_lowest(forward_with_projection(generator, features.col(i), oracle));

  // Observed pairs: one guaranteed label per item, then uniform fill to the
  // requested density.
  int64_t grid = static_cast<int64_t>(config.num_items) * config.num_workers;
  int64_t target = std::llround(config.density * static_cast<double>(grid));
  target = std::clamp<int64_t>(target, config.num_items, grid);

  Rng pair_rng = root.fork("pairs");
  std::vector<int> anchor_worker(config.num_items);
  for (int i = 0; i < config.num_items; ++i)
    anchor_worker[i] = static_cast<int>(pair_rng.next_below(config.num_workers));
  std::vector<int64_t> remaining;
  remaining.reserve(grid - config.num_items);
  for (int i = 0; i < config.num_items; ++i)
    for (int j = 0; j < config.num_workers; ++j)
      if (j != anchor_worker[i]) remaining.push_back(static_cast<int64_t>(i) * config.num_workers + j);
  pair_rng.shuffle(remaining);

  std::vector<int64_t> selected;
  selected.reserve(target);
  for (int i = 0; i < config.num_items; ++i)
    selected.push_back(static_cast<int64_t>(i) * config.num_workers + anchor_worker[i]);
  selected.insert(selected.end(), remaining.begin(),
                  remaining.begin() + (target - config.num_items));
  std::sort(selected.begin(), selected.end());

  // Labels sampled from each worker's own distribution, in (item, worker)
  // order so the draw sequence is independent of the selection shuffle.
  Rng label_rng = root.fork("labels");
  std::vector<LabelTriple> labels;
  labels.reserve(selected.size());
  int prev_item = -1;
  Eigen::MatrixXd expert_outputs;
  for (int64_t key : selected) {
    int i = static_cast<int>(key / config.num_workers);
    int j = static_cast<int>(key % config.num_workers);
    if (i != prev_item) {
      expert_outputs = experts_forward(generator, features.col(i));
      prev_item = i;
    }
    Eigen::VectorXd projection = expert_outputs * worker_projections.row(j).transpose();
    Eigen::VectorXd hidden = (generator.output_hidden.weight * projection +
                              generator.output_hidden.bias).cwiseMax(0.0);
    Eigen::VectorXd dist =
        softmax(generator.output_final.weight * hidden + generator.output_final.bias);
    labels.push_back({i, j, sample_categorical(dist, label_rng), Provenance::Original});
  }

  std::vector<std::string> item_ids(config.num_items);
  for (int i = 0; i < config.num_items; ++i) item_ids[i] = "i" + std::to_string(i);
  std::vector<std::string> worker_ids(config.num_workers);
  for (int j = 0; j < config.num_workers; ++j) worker_ids[j] = "w" + std::to_string(j);
  std::vector<std::string> class_names(config.num_classes);
  for (int k = 0; k < config.num_classes; ++k) class_names[k] = "c" + std::to_string(k);

  SynthResult result{
      CrowdDataset::create(std::move(item_ids), std::move(features),
                           worker_ids, std::move(class_names), std::move(labels),
                           std::move(truth)),
      std::move(oracle), std::move(worker_projections), std::move(generator)};
  result.generator.worker_ids = result.dataset.worker_ids();
  return result;
}

}  // namespace mmlc
