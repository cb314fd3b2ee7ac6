#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"

namespace mmlc {

// Architecture and training hyperparameters of the mixture-of-experts
// worker behavior model. feature_dim / num_workers / num_classes are
// resolved from the dataset before init_model.
struct MmlcConfig {
  int num_experts = 8;
  std::vector<int> expert_layer_sizes = {32, 16};  // per-layer output dims; last = spectral dim
  int gate_hidden_size = 32;
  int output_hidden_size = 32;
  double lambda = 1e-4;  // coefficient of the Frobenius-norm regularizer
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 100;
  uint64_t seed = 0;

  int feature_dim = 0;
  int num_workers = 0;
  int num_classes = 0;

  int spectral_dim() const { return expert_layer_sizes.back(); }
  void validate() const;  // throws InvalidConfig
};

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Full parameter set: E structurally identical expert stacks, the gate
// (worker one-hot -> embedding -> ReLU -> scoring layer -> softmax), and
// the output head (projection -> ReLU layer -> class softmax).
struct MmlcParameters {
  MmlcConfig config;
  std::vector<std::vector<Linear>> experts;
  Linear gate_embed;     // gate_hidden x num_workers
  Linear gate_score;     // num_experts x gate_hidden
  Linear output_hidden;  // output_hidden x spectral_dim
  Linear output_final;   // num_classes x output_hidden
  std::vector<std::string> worker_ids;  // interprets the embedding columns
};

// Gradient blocks, same tensor layout as MmlcParameters.
struct MmlcGradients {
  std::vector<std::vector<Linear>> experts;
  Linear gate_embed;
  Linear gate_score;
  Linear output_hidden;
  Linear output_final;
};

// Applies f to every Linear block in a fixed order: experts (stack-major,
// then layer), gate_embed, gate_score, output_hidden, output_final. This
// order defines initialization draws, checkpoint layout and optimizer
// state pairing.
template <typename Params, typename F>
void for_each_block(Params& params, F&& f) {
  for (size_t e = 0; e < params.experts.size(); ++e)
    for (size_t l = 0; l < params.experts[e].size(); ++l) f(params.experts[e][l]);
  f(params.gate_embed);
  f(params.gate_score);
  f(params.output_hidden);
  f(params.output_final);
}

// Intermediate activations of one forward pass, cached for backprop.
struct ForwardTrace {
  std::vector<std::vector<Eigen::VectorXd>> expert_pre;  // pre-activations per expert stack
  Eigen::MatrixXd expert_outputs;                        // U(x): spectral_dim x E
  Eigen::VectorXd gate_pre;
  Eigen::VectorXd gate_hidden;
  Eigen::VectorXd gate;        // v(w): on the E-simplex
  Eigen::VectorXd projection;  // U(x) v(w)
  Eigen::VectorXd output_pre;
  Eigen::VectorXd output_relu;
  Eigen::VectorXd distribution;  // on the K-simplex
};

struct LabeledExample {
  Eigen::VectorXd features;
  int worker = 0;
  int label = 0;
};
using Batch = std::vector<LabeledExample>;

struct TrainingLog {
  std::vector<double> epoch_mean_loss;
};

struct MissingPrediction {
  int item = 0;
  int worker = 0;
  int label = 0;
  Eigen::VectorXd distribution;
};

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) from stream
// Rng(config.seed).fork("init"), drawn row-major per block in
// for_each_block order; biases zero.
MmlcParameters init_model(const MmlcConfig& config);

// Column e is expert stack e applied to the features: fully connected
// layers with ReLU activations, final layer linear.
Eigen::MatrixXd experts_forward(const MmlcParameters& model, const Eigen::VectorXd& features);

// softmax(score(ReLU(embed(one-hot worker)))).
Eigen::VectorXd gate_forward(const MmlcParameters& model, int worker_index);

std::pair<Eigen::VectorXd, ForwardTrace> forward(const MmlcParameters& model,
                                                 const Eigen::VectorXd& features,
                                                 int worker_index);

// Class distribution for an externally supplied projection vector v on the
// expert simplex: output head applied to U(x) v.
Eigen::VectorXd forward_with_projection(const MmlcParameters& model,
                                        const Eigen::VectorXd& features,
                                        const Eigen::VectorXd& v);

// Mean cross-entropy over the batch (natural log, probabilities clamped
// below at 1e-12 inside the log only) plus lambda times the Frobenius norm
// of all weight matrices, biases excluded.
double loss(const MmlcParameters& model, const Batch& batch);

double frobenius_norm(const MmlcParameters& model);

// Analytic gradients of loss(). The regularizer contributes
// lambda * W / ||Theta||_F per weight block (zero when the norm is zero).
// When loss_out is non-null it receives the batch loss from the same pass.
MmlcGradients grad(const MmlcParameters& model, const Batch& batch, double* loss_out = nullptr);

// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) over the labeled
// triples for config.epochs epochs with seeded shuffling
// (Rng(config.seed).fork("train-shuffle")). Deterministic.
std::pair<MmlcParameters, TrainingLog> train(MmlcParameters model, const CrowdDataset& dataset);

// One prediction per (item, worker) pair absent from the dataset, in
// item-major order; label = argmax with lowest-index ties.
std::vector<MissingPrediction> predict_missing(const MmlcParameters& model,
                                               const CrowdDataset& dataset);

// Dataset/model agreement checks used by every consumer of a trained model.
void require_model_matches(const MmlcParameters& model, const CrowdDataset& dataset);

// Versioned JSON checkpoint with config, all tensors (row-major) and the
// worker-id ordering.
void save_model(const MmlcParameters& model, const std::string& path);
MmlcParameters load_model(const std::string& path);

}  // namespace mmlc
