#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errors.hpp"

namespace mmlc {

enum class Provenance : uint8_t { Original, Filled };

// One observed (item, worker, label) annotation. Indices refer to the
// owning dataset's item/worker/class registries.
struct LabelTriple {
  int item = 0;
  int worker = 0;
  int label = 0;
  Provenance provenance = Provenance::Original;

  friend bool operator==(const LabelTriple&, const LabelTriple&) = default;
};

// Immutable crowdsourced dataset: items with fixed-dimension feature
// vectors, a worker registry, at most one label per (item, worker) pair,
// and optional ground truth covering every item.
//
// Class labels are contiguous ints [0, K); class_names keeps the original
// label strings in first-appearance order so files and reports stay
// readable.
class CrowdDataset {
 public:
  static CrowdDataset create(std::vector<std::string> item_ids,
                             Eigen::MatrixXd features,  // feature_dim x num_items
                             std::vector<std::string> worker_ids,
                             std::vector<std::string> class_names,
                             std::vector<LabelTriple> labels,
                             std::optional<std::vector<int>> truth = std::nullopt);

  int num_items() const { return static_cast<int>(item_ids_.size()); }
  int num_workers() const { return static_cast<int>(worker_ids_.size()); }
  int num_classes() const { return static_cast<int>(class_names_.size()); }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  int feature_dim() const { return static_cast<int>(features_.rows()); }

  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& worker_ids() const { return worker_ids_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const Eigen::MatrixXd& features() const { return features_; }
  Eigen::VectorXd feature(int item) const { return features_.col(item); }
  const std::vector<LabelTriple>& labels() const { return labels_; }

  bool has_truth() const { return truth_.has_value(); }
  const std::vector<int>& truth() const;

  // Indices into labels(), in insertion order.
  const std::vector<int>& labels_of_item(int item) const { return by_item_[item]; }
  const std::vector<int>& labels_of_worker(int worker) const { return by_worker_[worker]; }

  bool is_labeled(int item, int worker) const {
    return labeled_pairs_.contains(pair_key(item, worker));
  }

  // -1 when the id is not registered.
  int item_index(const std::string& id) const;
  int worker_index(const std::string& id) const;
  int class_index(const std::string& name) const;

  // Same named content: ids, features, (item, worker, label, provenance)
  // triples as strings, and truth as strings. Internal index assignment is
  // not compared, so a dataset survives a save/load cycle even when the
  // files induce a different first-appearance order for classes.
  bool same_content(const CrowdDataset& other) const;

 private:
  CrowdDataset() = default;

  int64_t pair_key(int item, int worker) const {
    return static_cast<int64_t>(item) * num_workers() + worker;
  }

  std::vector<std::string> item_ids_;
  Eigen::MatrixXd features_;
  std::vector<std::string> worker_ids_;
  std::vector<std::string> class_names_;
  std::vector<LabelTriple> labels_;
  std::optional<std::vector<int>> truth_;

  std::vector<std::vector<int>> by_item_;
  std::vector<std::vector<int>> by_worker_;
  std::unordered_set<int64_t> labeled_pairs_;
  std::unordered_map<std::string, int> item_lookup_;
  std::unordered_map<std::string, int> worker_lookup_;
  std::unordered_map<std::string, int> class_lookup_;
};

// CSV ingestion. features.csv: header item_id,f0,...,f{d-1}. labels.csv:
// header item_id,worker_id,label with an optional trailing provenance
// column (orig/fill). truth.csv: header item_id,label. Item and worker
// order is first appearance; label strings map to class indices by first
// appearance in the labels file, then the truth file.
CrowdDataset load_dataset(const std::string& features_path,
                          const std::string& labels_path,
                          const std::optional<std::string>& truth_path = std::nullopt);

// Canonical CSV emission; load_dataset(save_dataset(ds)) reproduces ds.
// The provenance column is written only when a filled triple is present.
void save_dataset(const CrowdDataset& dataset,
                  const std::string& features_path,
                  const std::string& labels_path,
                  const std::optional<std::string>& truth_path = std::nullopt);
void save_features_csv(const CrowdDataset& dataset, const std::string& path);
void save_labels_csv(const CrowdDataset& dataset, const std::string& path);
void save_truth_csv(const CrowdDataset& dataset, const std::string& path);

// |D| / (|W| * |X|), in (0, 1].
double density(const CrowdDataset& dataset);

// Keeps at most max_labels uniformly chosen labels per item; items,
// workers and truth are untouched. Selection is seeded and per item:
// stream fork("cap").fork(item_id) picks the kept subset.
CrowdDataset apply_redundancy_cap(const CrowdDataset& dataset, int max_labels,
                                  uint64_t seed);

}  // namespace mmlc
