#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dataset.hpp"
#include "model.hpp"

namespace mmlc {

struct SynthConfig {
  int num_items = 0;
  int num_workers = 0;
  int num_classes = 0;
  int feature_dim = 0;
  double density = 1.0;          // fraction of the item x worker grid observed
  double worker_noise = 0.0;     // spread of worker projections around the oracle
  uint64_t seed = 0;
  void validate() const;
};

struct SynthResult {
  CrowdDataset dataset;                // carries ground truth
  Eigen::VectorXd oracle_projection;   // on the generator's expert simplex
  Eigen::MatrixXd worker_projections;  // num_workers x num_experts
  MmlcParameters generator;            // frozen generating model (experts + output head)
};

// Draws a frozen mixture-of-experts instance, an oracle projection on the
// expert simplex (Dirichlet(1)), and per-worker projections
//   v_j[e] proportional to oracle[e] * exp(worker_noise * N(0,1)),
// so worker_noise = 0 collapses every worker onto the oracle. Ground truth
// is the argmax of the oracle's class distribution per item; observed
// labels are sampled from each worker's own distribution on a seeded
// selection of (item, worker) pairs that hits the requested density while
// covering every item at least once.
SynthResult synth_generate(const SynthConfig& config);

}  // namespace mmlc
