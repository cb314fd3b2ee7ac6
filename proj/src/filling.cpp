#include "filling.hpp"

#include <algorithm>
#include <cmath>

#include "baselines.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace mmlc {

namespace {

FillReport assemble(const CrowdDataset& dataset, std::vector<LabelTriple> filled_triples,
                    const std::string& filler, uint64_t seed) {
  std::vector<LabelTriple> all = dataset.labels();
  all.insert(all.end(), filled_triples.begin(), filled_triples.end());

  std::optional<std::vector<int>> truth;
  if (dataset.has_truth()) truth = dataset.truth();
  FillReport report{
      CrowdDataset::create(dataset.item_ids(), dataset.features(), dataset.worker_ids(),
                           dataset.class_names(), std::move(all), std::move(truth)),
      dataset.num_labels(), static_cast<int>(filled_triples.size()), 0.0, filler, seed};
  report.final_density = density(report.filled);
  return report;
}

Eigen::VectorXd predict_distribution(const MmlcParameters& model,
                                     const Eigen::MatrixXd& expert_outputs,
                                     const Eigen::VectorXd& v) {
  Eigen::VectorXd projection = expert_outputs * v;
  Eigen::VectorXd hidden =
      (model.output_hidden.weight * projection + model.output_hidden.bias).cwiseMax(0.0);
  return softmax(model.output_final.weight * hidden + model.output_final.bias);
}

}  // namespace

FillReport fill_full(const MmlcParameters& model, const CrowdDataset& dataset) {
  std::vector<MissingPrediction> predictions = predict_missing(model, dataset);
  std::vector<LabelTriple> filled;
  filled.reserve(predictions.size());
  for (const MissingPrediction& p : predictions)
    filled.push_back({p.item, p.worker, p.label, Provenance::Filled});
  return assemble(dataset, std::move(filled), "mmlc-df", 0);
}

FillReport fill_to_target(const MmlcParameters& model, const CrowdDataset& dataset,
                          int per_worker_target, uint64_t seed) {
  if (per_worker_target < 0)
    fail(ErrorCode::InvalidConfig, "per_worker_target must be >= 0");
  require_model_matches(model, dataset);

  Rng fill_rng = Rng(seed).fork("fill");
  std::vector<std::pair<int, int>> chosen;  // (item, worker)
  for (int j = 0; j < dataset.num_workers(); ++j) {
    int want = std::min(per_worker_target, dataset.num_items());
    int have = static_cast<int>(dataset.labels_of_worker(j).size());
    if (have >= want) continue;
    std::vector<int> unlabeled;
    for (int i = 0; i < dataset.num_items(); ++i)
      if (!dataset.is_labeled(i, j)) unlabeled.push_back(i);
    fill_rng.fork(dataset.worker_ids()[j]).shuffle(unlabeled);
    for (int pos = 0; pos < want - have; ++pos) chosen.emplace_back(unlabeled[pos], j);
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<LabelTriple> filled;
  filled.reserve(chosen.size());
  int prev_item = -1;
  Eigen::MatrixXd expert_outputs;
  for (auto [i, j] : chosen) {
    if (i != prev_item) {
      expert_outputs = experts_forward(model, dataset.feature(i));
      prev_item = i;
    }
    Eigen::VectorXd dist = predict_distribution(model, expert_outputs, gate_forward(model, j));
    filled.push_back({i, j, argmax_lowest(dist), Provenance::Filled});
  }
  return assemble(dataset, std::move(filled), "mmlc-df", seed);
}

FillReport gmv_fill(const CrowdDataset& dataset, uint64_t seed) {
  const int K = dataset.num_classes();
  InferenceResult mv = mv_infer(dataset);

  // Smoothed agreement rate of each worker with the MV labels.
  Eigen::VectorXd ability(dataset.num_workers());
  for (int j = 0; j < dataset.num_workers(); ++j) {
    int agree = 0;
    const std::vector<int>& owned = dataset.labels_of_worker(j);
    for (int t : owned) {
      const LabelTriple& triple = dataset.labels()[t];
      if (triple.label == mv.labels[triple.item]) ++agree;
    }
    double smoothed = (agree + 1.0) / (static_cast<double>(owned.size()) + 2.0);
    ability[j] = std::clamp(smoothed, 1.0 / K, 1.0 - 1e-6);
  }

  Rng rng = Rng(seed).fork("gmv");
  std::vector<LabelTriple> filled;
  for (int i = 0; i < dataset.num_items(); ++i) {
    for (int j = 0; j < dataset.num_workers(); ++j) {
      if (dataset.is_labeled(i, j)) continue;
      int label = mv.labels[i];
      if (K > 1 && rng.next_double() >= ability[j]) {
        int other = static_cast<int>(rng.next_below(static_cast<uint64_t>(K - 1)));
        label = other >= label ? other + 1 : other;
      }
      filled.push_back({i, j, label, Provenance::Filled});
    }
  }
  return assemble(dataset, std::move(filled), "gmv", seed);
}

}  // namespace mmlc
