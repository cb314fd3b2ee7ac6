#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "dataset.hpp"
#include "model.hpp"

namespace mmlc {

// One row per worker: the gate projection v(w_j) on the expert simplex.
// weights, when present, are label-count proportions summing to 1.
struct WorkerProjectionMatrix {
  Eigen::MatrixXd rows;  // num_workers x num_experts
  std::optional<Eigen::VectorXd> weights;
  std::vector<std::string> worker_ids;
};

enum class ClusterKind { Mean, Median, Kde, MeanW, MedianW, KdeW };

struct ClusterMethod {
  ClusterKind kind = ClusterKind::Kde;
  std::optional<double> kde_bandwidth;  // overrides the Silverman rule
};

// "mean", "median", "kde", "mean-w", "median-w", "kde-w".
ClusterKind parse_cluster_kind(const std::string& name);
const char* cluster_kind_name(ClusterKind kind);
bool cluster_kind_weighted(ClusterKind kind);

// Row j = gate_forward(model, j); weights = |X_j| / sum_j |X_j|.
WorkerProjectionMatrix worker_projections(const MmlcParameters& model,
                                          const CrowdDataset& dataset);

// Distribution center of the worker projections.
//   Mean:   (weighted) arithmetic mean of the rows.
//   Median: coordinate-wise lower weighted median (smallest value whose
//           cumulative weight reaches half the total), renormalized.
//   KDE:    Gaussian kernel with per-dimension Silverman bandwidths
//           (weighted moments for the weighted variant), mode located by
//           mean-shift from the highest-density worker row; stops when the
//           step norm drops below 1e-8 or after 500 iterations.
// Unweighted variants are the weighted ones evaluated at uniform weights.
// Every result is renormalized onto the simplex.
Eigen::VectorXd find_oracle(const WorkerProjectionMatrix& projections,
                            const ClusterMethod& method);

// Class distribution of the oracle projection per item: the output head
// applied to U(x_i) v_oracle. Labels take the argmax, lowest index first.
InferenceResult oracle_labels(const MmlcParameters& model,
                              const Eigen::VectorXd& v_oracle,
                              const CrowdDataset& dataset);

struct UpperBoundResult {
  Eigen::VectorXd projection;
  double accuracy = 0.0;
};

// Optimizes a length-E logit vector (softmax-reparameterized) against the
// ground truth with experts and output head frozen: Adam, 2000 steps,
// learning rate 1e-2, initialized at the unweighted KDE center unless an
// explicit init is supplied.
UpperBoundResult truth_upper_bound(const MmlcParameters& model, const CrowdDataset& dataset,
                                   std::optional<Eigen::VectorXd> init = std::nullopt);

// Fraction of each worker's own labels that match the ground truth;
// workers without labels report 0.
std::vector<double> worker_accuracies(const CrowdDataset& dataset);

// CSV export: worker_id,v0..v{E-1},weight[,accuracy]. Weights default to
// uniform when the matrix carries none.
void export_projections(const WorkerProjectionMatrix& projections, const std::string& path,
                        const std::optional<std::vector<double>>& accuracies = std::nullopt);

}  // namespace mmlc
