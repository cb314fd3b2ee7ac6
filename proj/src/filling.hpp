#pragma once

#include <cstdint>
#include <string>

#include "dataset.hpp"
#include "model.hpp"

namespace mmlc {

// A completed dataset. Original triples appear unchanged and first; filled
// triples carry Provenance::Filled and are appended in (item, worker) order.
struct FillReport {
  CrowdDataset filled;
  int num_original = 0;
  int num_filled = 0;
  double final_density = 0.0;
  std::string filler;
  uint64_t seed = 0;
};

// Predicts a label for every unlabeled (item, worker) pair; the result has
// density exactly 1.
FillReport fill_full(const MmlcParameters& model, const CrowdDataset& dataset);

// Raises each worker to min(per_worker_target, num_items) labels by
// predicting on unlabeled items drawn from a per-worker seeded permutation
// (stream fork("fill").fork(worker_id)). The permutation is independent of
// the target, so fill sets are nested across targets for a shared seed.
// target = num_items reproduces fill_full; target = 0 is the identity.
FillReport fill_to_target(const MmlcParameters& model, const CrowdDataset& dataset,
                          int per_worker_target, uint64_t seed);

// Majority-vote filler: worker ability a_j = (agreements + 1) /
// (answered + 2), capped to [1/K, 1 - 1e-6]; each unlabeled pair receives
// the MV label with probability a_j, otherwise a uniform draw over the
// other K - 1 classes.
FillReport gmv_fill(const CrowdDataset& dataset, uint64_t seed);

}  // namespace mmlc
