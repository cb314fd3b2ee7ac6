#pragma once

#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace testutil {

// Random sparse dataset for property tests: every item gets at least one
// label, pairs never repeat, features are irrelevant to the baselines.
inline mmlc::CrowdDataset random_dataset(mmlc::Rng& rng, int max_items = 8,
                                         int max_workers = 5, int max_classes = 4) {
  int items = 1 + static_cast<int>(rng.next_below(max_items));
  int workers = 1 + static_cast<int>(rng.next_below(max_workers));
  int classes = 2 + static_cast<int>(rng.next_below(max_classes - 1));

  std::vector<std::string> item_ids, worker_ids, class_names;
  for (int i = 0; i < items; ++i) item_ids.push_back("i" + std::to_string(i));
  for (int j = 0; j < workers; ++j) worker_ids.push_back("w" + std::to_string(j));
  for (int k = 0; k < classes; ++k) class_names.push_back("c" + std::to_string(k));

  std::vector<mmlc::LabelTriple> triples;
  for (int i = 0; i < items; ++i) {
    for (int j = 0; j < workers; ++j) {
      if (rng.next_double() < 0.6) {
        int label = static_cast<int>(rng.next_below(classes));
        triples.push_back({i, j, label, mmlc::Provenance::Original});
      }
    }
    if (triples.empty() || triples.back().item != i)  // ensure >= 1 label per item
      triples.push_back({i, 0, static_cast<int>(rng.next_below(classes)),
                         mmlc::Provenance::Original});
  }
  return mmlc::CrowdDataset::create(item_ids, Eigen::MatrixXd::Zero(1, items), worker_ids,
                                    class_names, triples);
}

}  // namespace testutil
