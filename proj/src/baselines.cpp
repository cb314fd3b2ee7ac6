#include "baselines.hpp"

#include <cmath>
#include <limits>

#include "numeric.hpp"

namespace mmlc {

namespace {

void require_all_items_labeled(const CrowdDataset& dataset) {
  for (int i = 0; i < dataset.num_items(); ++i)
    if (dataset.labels_of_item(i).empty())
      fail(ErrorCode::UnlabeledItem, "item '" + dataset.item_ids()[i] + "' has no labels");
}

std::vector<Eigen::VectorXd> mv_fractions(const CrowdDataset& dataset) {
  const int K = dataset.num_classes();
  std::vector<Eigen::VectorXd> fractions(dataset.num_items());
  for (int i = 0; i < dataset.num_items(); ++i) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (int t : dataset.labels_of_item(i)) counts[dataset.labels()[t].label] += 1.0;
    fractions[i] = counts / counts.sum();
  }
  return fractions;
}

// M-step for DS/FDS from soft per-item class weights.
ConfusionModel ds_mstep(const CrowdDataset& dataset,
                        const std::vector<Eigen::VectorXd>& weights) {
  const int K = dataset.num_classes();
  const int W = dataset.num_workers();
  ConfusionModel model;

  Eigen::VectorXd priors = Eigen::VectorXd::Constant(K, kEmSmoothing);
  for (const Eigen::VectorXd& w : weights) priors += w;
  model.class_priors = priors / priors.sum();

  model.worker_confusion.assign(W, Eigen::MatrixXd::Constant(K, K, kEmSmoothing));
  for (const LabelTriple& t : dataset.labels())
    model.worker_confusion[t.worker].col(t.label) += weights[t.item];
  for (Eigen::MatrixXd& conf : model.worker_confusion) {
    for (int k = 0; k < K; ++k) conf.row(k) /= conf.row(k).sum();
  }
  return model;
}

std::vector<Eigen::VectorXd> hard_weights(const std::vector<int>& assignment, int K) {
  std::vector<Eigen::VectorXd> weights(assignment.size());
  for (size_t i = 0; i < assignment.size(); ++i) {
    weights[i] = Eigen::VectorXd::Zero(K);
    weights[i][assignment[i]] = 1.0;
  }
  return weights;
}

std::vector<int> argmax_labels(const std::vector<Eigen::VectorXd>& posteriors) {
  std::vector<int> labels(posteriors.size());
  for (size_t i = 0; i < posteriors.size(); ++i) labels[i] = argmax_lowest(posteriors[i]);
  return labels;
}

// Complete-data log-posterior of a hard assignment, including the
// Dirichlet pseudo-count terms the smoothed M-step maximizes. This is the
// quantity classification EM increases monotonically.
double fds_objective(const CrowdDataset& dataset, const std::vector<int>& assignment,
                     const ConfusionModel& model) {
  const int K = dataset.num_classes();
  double value = 0.0;
  for (size_t i = 0; i < assignment.size(); ++i)
    value += std::log(model.class_priors[assignment[i]]);
  for (const LabelTriple& t : dataset.labels())
    value += std::log(model.worker_confusion[t.worker](assignment[t.item], t.label));
  for (int k = 0; k < K; ++k) value += kEmSmoothing * std::log(model.class_priors[k]);
  for (const Eigen::MatrixXd& conf : model.worker_confusion)
    value += kEmSmoothing * conf.array().log().sum();
  return value;
}

}  // namespace

InferenceResult mv_infer(const CrowdDataset& dataset) {
  require_all_items_labeled(dataset);
  InferenceResult result;
  result.method = "mv";
  result.posteriors = mv_fractions(dataset);
  result.labels = argmax_labels(*result.posteriors);
  result.iterations = 1;
  result.converged = true;
  return result;
}

std::vector<Eigen::VectorXd> ds_posteriors(const CrowdDataset& dataset,
                                           const ConfusionModel& model) {
  const int K = dataset.num_classes();
  const Eigen::VectorXd log_priors = model.class_priors.array().log();
  std::vector<Eigen::VectorXd> posteriors(dataset.num_items());
  for (int i = 0; i < dataset.num_items(); ++i) {
    Eigen::VectorXd log_post = log_priors;
    for (int t : dataset.labels_of_item(i)) {
      const LabelTriple& triple = dataset.labels()[t];
      for (int k = 0; k < K; ++k)
        log_post[k] += std::log(model.worker_confusion[triple.worker](k, triple.label));
    }
    double max_log = log_post.maxCoeff();
    if (!std::isfinite(max_log))
      fail(ErrorCode::NumericalUnderflow,
           "zero label likelihood for item '" + dataset.item_ids()[i] + "'");
    Eigen::VectorXd shifted = (log_post.array() - max_log).exp();
    posteriors[i] = shifted / shifted.sum();
  }
  return posteriors;
}

double ds_log_likelihood(const CrowdDataset& dataset, const ConfusionModel& model) {
  const int K = dataset.num_classes();
  const Eigen::VectorXd log_priors = model.class_priors.array().log();
  double total = 0.0;
  for (int i = 0; i < dataset.num_items(); ++i) {
    Eigen::VectorXd log_post = log_priors;
    for (int t : dataset.labels_of_item(i)) {
      const LabelTriple& triple = dataset.labels()[t];
      for (int k = 0; k < K; ++k)
        log_post[k] += std::log(model.worker_confusion[triple.worker](k, triple.label));
    }
    double max_log = log_post.maxCoeff();
    if (!std::isfinite(max_log))
      fail(ErrorCode::NumericalUnderflow,
           "zero label likelihood for item '" + dataset.item_ids()[i] + "'");
    total += max_log + std::log((log_post.array() - max_log).exp().sum());
  }
  return total;
}

double ds_map_objective(const CrowdDataset& dataset, const ConfusionModel& model) {
  double prior_terms = kEmSmoothing * model.class_priors.array().log().sum();
  for (const Eigen::MatrixXd& conf : model.worker_confusion)
    prior_terms += kEmSmoothing * conf.array().log().sum();
  return ds_log_likelihood(dataset, model) + prior_terms;
}

EmOutcome ds_infer(const CrowdDataset& dataset, int max_iters, double tol) {
  if (max_iters < 1) fail(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (tol <= 0.0) fail(ErrorCode::InvalidConfig, "tol must be > 0");
  require_all_items_labeled(dataset);

  EmOutcome out;
  std::vector<Eigen::VectorXd> posteriors = mv_fractions(dataset);
  double prev_objective = -std::numeric_limits<double>::infinity();
  int iter = 0;
  bool converged = false;
  while (iter < max_iters) {
    ++iter;
    out.model = ds_mstep(dataset, posteriors);
    posteriors = ds_posteriors(dataset, out.model);
    double objective = ds_map_objective(dataset, out.model);
    out.objective_trace.push_back(objective);
    if (objective - prev_objective < tol) {
      converged = true;
      break;
    }
    prev_objective = objective;
  }

  out.result.method = "ds";
  out.result.labels = argmax_labels(posteriors);
  out.result.posteriors = std::move(posteriors);
  out.result.iterations = iter;
  out.result.converged = converged;
  return out;
}

EmOutcome fds_infer(const CrowdDataset& dataset, int max_iters) {
  if (max_iters < 1) fail(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  require_all_items_labeled(dataset);

  EmOutcome out;
  std::vector<int> assignment = argmax_labels(mv_fractions(dataset));
  std::vector<Eigen::VectorXd> posteriors;
  int iter = 0;
  bool converged = false;
  while (iter < max_iters) {
    ++iter;
    out.model = ds_mstep(dataset, hard_weights(assignment, dataset.num_classes()));
    posteriors = ds_posteriors(dataset, out.model);
    std::vector<int> next = argmax_labels(posteriors);
    out.objective_trace.push_back(fds_objective(dataset, next, out.model));
    if (next == assignment) {
      converged = true;
      break;
    }
    assignment = std::move(next);
  }

  out.result.method = "fds";
  out.result.labels = assignment;
  out.result.posteriors = std::move(posteriors);
  out.result.iterations = iter;
  out.result.converged = converged;
  return out;
}

std::vector<Eigen::VectorXd> hds_posteriors(const CrowdDataset& dataset,
                                            const Eigen::VectorXd& class_priors,
                                            const Eigen::VectorXd& worker_correctness) {
  const int K = dataset.num_classes();
  const Eigen::VectorXd log_priors = class_priors.array().log();
  std::vector<Eigen::VectorXd> posteriors(dataset.num_items());
  for (int i = 0; i < dataset.num_items(); ++i) {
    Eigen::VectorXd log_post = log_priors;
    for (int t : dataset.labels_of_item(i)) {
      const LabelTriple& triple = dataset.labels()[t];
      double p = worker_correctness[triple.worker];
      double log_miss = std::log((1.0 - p) / (K - 1));
      double log_hit = std::log(p);
      for (int k = 0; k < K; ++k) log_post[k] += (k == triple.label) ? log_hit : log_miss;
    }
    double max_log = log_post.maxCoeff();
    if (!std::isfinite(max_log))
      fail(ErrorCode::NumericalUnderflow,
           "zero label likelihood for item '" + dataset.item_ids()[i] + "'");
    Eigen::VectorXd shifted = (log_post.array() - max_log).exp();
    posteriors[i] = shifted / shifted.sum();
  }
  return posteriors;
}

EmOutcome hds_infer(const CrowdDataset& dataset, int max_iters, double tol) {
  if (max_iters < 1) fail(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (tol <= 0.0) fail(ErrorCode::InvalidConfig, "tol must be > 0");
  if (dataset.num_classes() < 2)
    fail(ErrorCode::InvalidConfig, "one-coin model needs at least 2 classes");
  require_all_items_labeled(dataset);
  const int K = dataset.num_classes();

  EmOutcome out;
  std::vector<Eigen::VectorXd> posteriors = mv_fractions(dataset);
  double prev_objective = -std::numeric_limits<double>::infinity();
  int iter = 0;
  bool converged = false;
  while (iter < max_iters) {
    ++iter;
    // M-step
    Eigen::VectorXd priors = Eigen::VectorXd::Constant(K, kEmSmoothing);
    for (const Eigen::VectorXd& q : posteriors) priors += q;
    priors /= priors.sum();
    Eigen::VectorXd correct = Eigen::VectorXd::Constant(dataset.num_workers(), kEmSmoothing);
    Eigen::VectorXd answered = Eigen::VectorXd::Constant(dataset.num_workers(), 2.0 * kEmSmoothing);
    for (const LabelTriple& t : dataset.labels()) {
      correct[t.worker] += posteriors[t.item][t.label];
      answered[t.worker] += 1.0;
    }
    out.model.class_priors = priors;
    out.model.worker_correctness = correct.cwiseQuotient(answered);
    // E-step
    posteriors = hds_posteriors(dataset, out.model.class_priors, out.model.worker_correctness);
    double loglik = 0.0;
    {
      const Eigen::VectorXd log_priors = out.model.class_priors.array().log();
      for (int i = 0; i < dataset.num_items(); ++i) {
        Eigen::VectorXd log_post = log_priors;
        for (int t : dataset.labels_of_item(i)) {
          const LabelTriple& triple = dataset.labels()[t];
          double p = out.model.worker_correctness[triple.worker];
          for (int k = 0; k < K; ++k)
            log_post[k] += (k == triple.label) ? std::log(p) : std::log((1.0 - p) / (K - 1));
        }
        double max_log = log_post.maxCoeff();
        loglik += max_log + std::log((log_post.array() - max_log).exp().sum());
      }
    }
    // Beta/Dirichlet log-prior terms matching the smoothed M-step.
    double objective = loglik + kEmSmoothing * out.model.class_priors.array().log().sum();
    for (int j = 0; j < dataset.num_workers(); ++j) {
      double p = out.model.worker_correctness[j];
      objective += kEmSmoothing * (std::log(p) + std::log(1.0 - p));
    }
    out.objective_trace.push_back(objective);
    if (objective - prev_objective < tol) {
      converged = true;
      break;
    }
    prev_objective = objective;
  }

  out.result.method = "hds";
  out.result.labels = argmax_labels(posteriors);
  out.result.posteriors = std::move(posteriors);
  out.result.iterations = iter;
  out.result.converged = converged;
  return out;
}

double accuracy(const InferenceResult& result, const std::vector<int>& truth) {
  if (truth.size() != result.labels.size())
    fail(ErrorCode::MissingTruth, "truth does not cover every inferred item");
  if (result.labels.empty()) fail(ErrorCode::EmptyDataset, "no inferred labels");
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (result.labels[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace mmlc
