#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "numeric.hpp"

namespace mmlc {

namespace {

constexpr double kMeanShiftStepTol = 1e-8;
constexpr int kMeanShiftMaxIters = 500;
constexpr int kUpperBoundSteps = 2000;
constexpr double kUpperBoundLearningRate = 1e-2;

Eigen::VectorXd uniform_weights(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

Eigen::VectorXd weighted_mean(const Eigen::MatrixXd& rows, const Eigen::VectorXd& w) {
  return rows.transpose() * w;
}

Eigen::VectorXd weighted_median(const Eigen::MatrixXd& rows, const Eigen::VectorXd& w) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index dim = rows.cols();
  const double half = w.sum() / 2.0;
  Eigen::VectorXd center(dim);
  std::vector<int> order(n);
  for (Eigen::Index d = 0; d < dim; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return rows(a, d) < rows(b, d); });
    double acc = 0.0;
    double value = rows(order.back(), d);
    for (int idx : order) {
      acc += w[idx];
      if (acc >= half) {
        value = rows(idx, d);
        break;
      }
    }
    center[d] = value;
  }
  return center;
}

// Per-dimension Silverman bandwidths from weighted moments; the effective
// sample size 1 / sum(w^2) reduces to n for uniform weights.
Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& rows, const Eigen::VectorXd& w) {
  const Eigen::Index dim = rows.cols();
  Eigen::VectorXd mean = weighted_mean(rows, w);
  Eigen::VectorXd variance = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    Eigen::VectorXd diff = rows.row(j).transpose() - mean;
    variance += w[j] * diff.cwiseProduct(diff);
  }
  double n_eff = 1.0 / w.squaredNorm();
  double factor = std::pow(4.0 / ((dim + 2.0) * n_eff), 1.0 / (dim + 4.0));
  Eigen::VectorXd h = variance.cwiseSqrt() * factor;
  for (Eigen::Index d = 0; d < dim; ++d) h[d] = std::max(h[d], 1e-9);
  return h;
}

double kernel_at(const Eigen::MatrixXd& rows, const Eigen::VectorXd& h,
                 const Eigen::VectorXd& x, Eigen::Index j) {
  double q = 0.0;
  for (Eigen::Index d = 0; d < rows.cols(); ++d) {
    double z = (x[d] - rows(j, d)) / h[d];
    q += z * z;
  }
  return std::exp(-0.5 * q);
}

Eigen::VectorXd kde_mode(const Eigen::MatrixXd& rows, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& h) {
  const Eigen::Index n = rows.rows();
  // Start from the highest-density worker row.
  Eigen::Index start = 0;
  double best = -1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double density = 0.0;
    for (Eigen::Index l = 0; l < n; ++l)
      density += w[l] * kernel_at(rows, h, rows.row(j).transpose(), l);
    if (density > best) {
      best = density;
      start = j;
    }
  }

  Eigen::VectorXd x = rows.row(start).transpose();
  for (int iter = 0; iter < kMeanShiftMaxIters; ++iter) {
    Eigen::VectorXd numerator = Eigen::VectorXd::Zero(rows.cols());
    double denominator = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      double k = w[l] * kernel_at(rows, h, x, l);
      numerator += k * rows.row(l).transpose();
      denominator += k;
    }
    Eigen::VectorXd next = numerator / denominator;
    double step = (next - x).norm();
    x = next;
    if (step < kMeanShiftStepTol) break;
  }
  return x;
}

}  // namespace

ClusterKind parse_cluster_kind(const std::string& name) {
  if (name == "mean") return ClusterKind::Mean;
  if (name == "median") return ClusterKind::Median;
  if (name == "kde") return ClusterKind::Kde;
  if (name == "mean-w") return ClusterKind::MeanW;
  if (name == "median-w") return ClusterKind::MedianW;
  if (name == "kde-w") return ClusterKind::KdeW;
  fail(ErrorCode::UnknownMethod, "unknown cluster method '" + name + "'");
}

const char* cluster_kind_name(ClusterKind kind) {
  switch (kind) {
    case ClusterKind::Mean: return "mean";
    case ClusterKind::Median: return "median";
    case ClusterKind::Kde: return "kde";
    case ClusterKind::MeanW: return "mean-w";
    case ClusterKind::MedianW: return "median-w";
    case ClusterKind::KdeW: return "kde-w";
  }
  return "unknown";
}

bool cluster_kind_weighted(ClusterKind kind) {
  return kind == ClusterKind::MeanW || kind == ClusterKind::MedianW ||
         kind == ClusterKind::KdeW;
}

WorkerProjectionMatrix worker_projections(const MmlcParameters& model,
                                          const CrowdDataset& dataset) {
  require_model_matches(model, dataset);
  WorkerProjectionMatrix projections;
  projections.rows.resize(dataset.num_workers(), model.config.num_experts);
  for (int j = 0; j < dataset.num_workers(); ++j)
    projections.rows.row(j) = gate_forward(model, j).transpose();
  Eigen::VectorXd weights(dataset.num_workers());
  for (int j = 0; j < dataset.num_workers(); ++j)
    weights[j] = static_cast<double>(dataset.labels_of_worker(j).size());
  projections.weights = weights / weights.sum();
  projections.worker_ids = dataset.worker_ids();
  return projections;
}

Eigen::VectorXd find_oracle(const WorkerProjectionMatrix& projections,
                            const ClusterMethod& method) {
  const Eigen::Index n = projections.rows.rows();
  if (n == 0) fail(ErrorCode::EmptyMatrix, "no worker projections");

  Eigen::VectorXd weights;
  if (cluster_kind_weighted(method.kind)) {
    if (!projections.weights.has_value())
      fail(ErrorCode::MissingWeights, "weighted cluster method needs worker weights");
    weights = *projections.weights;
  } else {
    weights = uniform_weights(n);
  }

  Eigen::VectorXd center;
  switch (method.kind) {
    case ClusterKind::Mean:
    case ClusterKind::MeanW:
      center = weighted_mean(projections.rows, weights);
      break;
    case ClusterKind::Median:
    case ClusterKind::MedianW:
      center = weighted_median(projections.rows, weights);
      break;
    case ClusterKind::Kde:
    case ClusterKind::KdeW: {
      Eigen::VectorXd h;
      if (method.kde_bandwidth.has_value()) {
        if (*method.kde_bandwidth <= 0.0)
          fail(ErrorCode::InvalidConfig, "kde_bandwidth must be > 0");
        h = Eigen::VectorXd::Constant(projections.rows.cols(), *method.kde_bandwidth);
      } else {
        h = silverman_bandwidths(projections.rows, weights);
      }
      center = kde_mode(projections.rows, weights, h);
      break;
    }
  }
  return center / center.sum();
}

InferenceResult oracle_labels(const MmlcParameters& model,
                              const Eigen::VectorXd& v_oracle,
                              const CrowdDataset& dataset) {
  if (model.config.feature_dim != dataset.feature_dim())
    fail(ErrorCode::DimensionMismatch, "model feature_dim does not match dataset");
  if (model.config.num_classes != dataset.num_classes())
    fail(ErrorCode::DimensionMismatch, "model num_classes does not match dataset");
  if (v_oracle.size() != model.config.num_experts)
    fail(ErrorCode::DimensionMismatch, "oracle projection does not match num_experts");

  InferenceResult result;
  result.method = "mmlc-owf";
  result.labels.resize(dataset.num_items());
  std::vector<Eigen::VectorXd> posteriors(dataset.num_items());
  for (int i = 0; i < dataset.num_items(); ++i) {
    posteriors[i] = forward_with_projection(model, dataset.feature(i), v_oracle);
    result.labels[i] = argmax_lowest(posteriors[i]);
  }
  result.posteriors = std::move(posteriors);
  result.iterations = 1;
  result.converged = true;
  return result;
}

UpperBoundResult truth_upper_bound(const MmlcParameters& model, const CrowdDataset& dataset,
                                   std::optional<Eigen::VectorXd> init) {
  const std::vector<int>& truth = dataset.truth();
  const int num_experts = model.config.num_experts;

  Eigen::VectorXd v0;
  if (init.has_value()) {
    if (init->size() != num_experts)
      fail(ErrorCode::DimensionMismatch, "init projection does not match num_experts");
    v0 = *init;
  } else {
    v0 = find_oracle(worker_projections(model, dataset), ClusterMethod{ClusterKind::Kde, {}});
  }

  // Cache U(x_i); experts and output head stay frozen.
  std::vector<Eigen::MatrixXd> expert_outputs(dataset.num_items());
  for (int i = 0; i < dataset.num_items(); ++i)
    expert_outputs[i] = experts_forward(model, dataset.feature(i));

  Eigen::VectorXd logits = v0.cwiseMax(1e-12).array().log();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(num_experts);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(num_experts);
  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  const double scale = 1.0 / static_cast<double>(dataset.num_items());

  for (int step = 1; step <= kUpperBoundSteps; ++step) {
    Eigen::VectorXd v = softmax(logits);
    Eigen::VectorXd dv = Eigen::VectorXd::Zero(num_experts);
    for (int i = 0; i < dataset.num_items(); ++i) {
      Eigen::VectorXd projection = expert_outputs[i] * v;
      Eigen::VectorXd pre = model.output_hidden.weight * projection + model.output_hidden.bias;
      Eigen::VectorXd hidden = pre.cwiseMax(0.0);
      Eigen::VectorXd dist = softmax(model.output_final.weight * hidden + model.output_final.bias);
      Eigen::VectorXd dlogits = dist;
      dlogits[truth[i]] -= 1.0;
      Eigen::VectorXd dh = model.output_final.weight.transpose() * dlogits;
      Eigen::VectorXd dpre = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      dv += scale * (expert_outputs[i].transpose() *
                     (model.output_hidden.weight.transpose() * dpre));
    }
    Eigen::VectorXd dlog = v.cwiseProduct(dv - Eigen::VectorXd::Constant(num_experts, v.dot(dv)));
    m = beta1 * m + (1.0 - beta1) * dlog;
    s = beta2 * s + (1.0 - beta2) * dlog.cwiseProduct(dlog);
    double corr1 = 1.0 - std::pow(beta1, step);
    double corr2 = 1.0 - std::pow(beta2, step);
    logits -= kUpperBoundLearningRate *
              (m / corr1).cwiseQuotient(((s / corr2).cwiseSqrt().array() + eps).matrix());
  }

  UpperBoundResult result;
  result.projection = softmax(logits);
  result.accuracy = accuracy(oracle_labels(model, result.projection, dataset), truth);
  return result;
}

std::vector<double> worker_accuracies(const CrowdDataset& dataset) {
  const std::vector<int>& truth = dataset.truth();
  std::vector<double> accuracies(dataset.num_workers(), 0.0);
  for (int j = 0; j < dataset.num_workers(); ++j) {
    const std::vector<int>& owned = dataset.labels_of_worker(j);
    if (owned.empty()) continue;
    int correct = 0;
    for (int t : owned) {
      const LabelTriple& triple = dataset.labels()[t];
      if (triple.label == truth[triple.item]) ++correct;
    }
    accuracies[j] = static_cast<double>(correct) / static_cast<double>(owned.size());
  }
  return accuracies;
}

void export_projections(const WorkerProjectionMatrix& projections, const std::string& path,
                        const std::optional<std::vector<double>>& accuracies) {
  const Eigen::Index n = projections.rows.rows();
  if (n == 0) fail(ErrorCode::EmptyMatrix, "no worker projections");
  if (static_cast<Eigen::Index>(projections.worker_ids.size()) != n)
    fail(ErrorCode::DimensionMismatch, "worker id list does not match projection rows");
  if (accuracies.has_value() && static_cast<Eigen::Index>(accuracies->size()) != n)
    fail(ErrorCode::DimensionMismatch, "accuracy list does not match projection rows");

  Eigen::VectorXd weights =
      projections.weights.has_value() ? *projections.weights : uniform_weights(n);

  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  char buf[40];
  auto fmt = [&buf](double value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf);
  };
  out << "worker_id";
  for (Eigen::Index e = 0; e < projections.rows.cols(); ++e) out << ",v" << e;
  out << ",weight";
  if (accuracies.has_value()) out << ",accuracy";
  out << "\n";
  for (Eigen::Index j = 0; j < n; ++j) {
    out << projections.worker_ids[j];
    for (Eigen::Index e = 0; e < projections.rows.cols(); ++e)
      out << ',' << fmt(projections.rows(j, e));
    out << ',' << fmt(weights[j]);
    if (accuracies.has_value()) out << ',' << fmt((*accuracies)[j]);
    out << "\n";
  }
}

}  // namespace mmlc
