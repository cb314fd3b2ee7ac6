#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace mmlc {

// Per-item inference output. labels[i] is the class index for item i;
// posteriors (when present) live on the K-simplex and argmax to labels[i]
// with ties broken toward the lowest class index.
struct InferenceResult {
  std::string method;
  std::vector<int> labels;
  std::optional<std::vector<Eigen::VectorXd>> posteriors;
  int iterations = 0;
  bool converged = true;
};

// Worker behavior parameters shared by the EM baselines. worker_confusion
// holds one K x K row-stochastic matrix per worker (DS/FDS);
// worker_correctness holds the one-coin probability p_j per worker (HDS).
// Only the fields a method estimates are populated.
struct ConfusionModel {
  Eigen::VectorXd class_priors;
  std::vector<Eigen::MatrixXd> worker_confusion;
  Eigen::VectorXd worker_correctness;
};

struct EmOutcome {
  InferenceResult result;
  ConfusionModel model;
  // Monitored objective per EM iteration. With pseudo-count smoothing the
  // M-step maximizes the log-posterior, not the raw likelihood, so the
  // monotone quantity is the observed-data log-likelihood plus the
  // Dirichlet/Beta log-prior terms (DS/HDS), respectively the penalized
  // complete-data log-posterior (FDS). Non-decreasing per iteration up to
  // rounding.
  std::vector<double> objective_trace;
};

// Laplace pseudo-count applied in every M-step.
inline constexpr double kEmSmoothing = 0.01;

// Majority vote; ties go to the lowest class index. Posteriors are the
// per-item vote fractions.
InferenceResult mv_infer(const CrowdDataset& dataset);

// Dawid-Skene EM. Soft posteriors start at the MV vote fractions; each
// iteration runs M-step (priors and confusion matrices with kEmSmoothing
// pseudo-counts) then E-step, and stops when the observed-data
// log-likelihood improves by less than tol.
EmOutcome ds_infer(const CrowdDataset& dataset, int max_iters = 100, double tol = 1e-6);

// Hard-assignment (classification EM) variant of DS: the E-step commits
// each item to its argmax class. Stops at an assignment fixed point.
EmOutcome fds_infer(const CrowdDataset& dataset, int max_iters = 100);

// One-coin model: worker j is correct with probability p_j and errs
// uniformly over the remaining K-1 classes.
EmOutcome hds_infer(const CrowdDataset& dataset, int max_iters = 100, double tol = 1e-6);

// Fraction of items whose inferred label equals the ground truth.
double accuracy(const InferenceResult& result, const std::vector<int>& truth);

// E-step posterior computation for fixed parameters; the EM loops above
// use these, and tests may drive them directly.
std::vector<Eigen::VectorXd> ds_posteriors(const CrowdDataset& dataset,
                                           const ConfusionModel& model);
std::vector<Eigen::VectorXd> hds_posteriors(const CrowdDataset& dataset,
                                            const Eigen::VectorXd& class_priors,
                                            const Eigen::VectorXd& worker_correctness);

// Raw observed-data log-likelihood under per-worker confusion matrices.
double ds_log_likelihood(const CrowdDataset& dataset, const ConfusionModel& model);

// ds_log_likelihood plus the pseudo-count log-prior terms; the quantity
// smoothed DS EM increases monotonically.
double ds_map_objective(const CrowdDataset& dataset, const ConfusionModel& model);

}  // namespace mmlc
