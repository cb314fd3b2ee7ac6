#include "model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace mmlc {

namespace {

using nlohmann::json;

Eigen::VectorXd relu(const Eigen::VectorXd& z) { return z.cwiseMax(0.0); }

Eigen::VectorXd relu_mask(const Eigen::VectorXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

MmlcGradients zeros_like(const MmlcParameters& model) {
  MmlcGradients g;
  g.experts.resize(model.experts.size());
  for (size_t e = 0; e < model.experts.size(); ++e) {
    g.experts[e].resize(model.experts[e].size());
    for (size_t l = 0; l < model.experts[e].size(); ++l) {
      g.experts[e][l].weight = Eigen::MatrixXd::Zero(model.experts[e][l].weight.rows(),
                                                     model.experts[e][l].weight.cols());
      g.experts[e][l].bias = Eigen::VectorXd::Zero(model.experts[e][l].bias.size());
    }
  }
  auto zero_of = [](const Linear& src) {
    Linear out;
    out.weight = Eigen::MatrixXd::Zero(src.weight.rows(), src.weight.cols());
    out.bias = Eigen::VectorXd::Zero(src.bias.size());
    return out;
  };
  g.gate_embed = zero_of(model.gate_embed);
  g.gate_score = zero_of(model.gate_score);
  g.output_hidden = zero_of(model.output_hidden);
  g.output_final = zero_of(model.output_final);
  return g;
}

template <typename Params>
std::vector<Linear*> block_pointers(Params& params) {
  std::vector<Linear*> blocks;
  for_each_block(params, [&](Linear& b) { blocks.push_back(&b); });
  return blocks;
}

template <typename Params>
std::vector<const Linear*> block_pointers(const Params& params) {
  std::vector<const Linear*> blocks;
  for_each_block(params, [&](const Linear& b) { blocks.push_back(&b); });
  return blocks;
}

void backprop_example(const MmlcParameters& model, const LabeledExample& ex,
                      const ForwardTrace& trace, MmlcGradients& grads) {
  const int num_experts = model.config.num_experts;

  // Output head: d(cross-entropy)/d(logits) = p - onehot(y).
  Eigen::VectorXd dlogits = trace.distribution;
  dlogits[ex.label] -= 1.0;
  grads.output_final.weight += dlogits * trace.output_relu.transpose();
  grads.output_final.bias += dlogits;
  Eigen::VectorXd dh = model.output_final.weight.transpose() * dlogits;
  Eigen::VectorXd dz = dh.cwiseProduct(relu_mask(trace.output_pre));
  grads.output_hidden.weight += dz * trace.projection.transpose();
  grads.output_hidden.bias += dz;
  Eigen::VectorXd dproj = model.output_hidden.weight.transpose() * dz;

  // Gate: through softmax then the scoring and embedding layers.
  Eigen::VectorXd dv = trace.expert_outputs.transpose() * dproj;
  double vdot = trace.gate.dot(dv);
  Eigen::VectorXd dscore = trace.gate.cwiseProduct(
      dv - Eigen::VectorXd::Constant(num_experts, vdot));
  grads.gate_score.weight += dscore * trace.gate_hidden.transpose();
  grads.gate_score.bias += dscore;
  Eigen::VectorXd dgh = model.gate_score.weight.transpose() * dscore;
  Eigen::VectorXd dgz = dgh.cwiseProduct(relu_mask(trace.gate_pre));
  grads.gate_embed.weight.col(ex.worker) += dgz;
  grads.gate_embed.bias += dgz;

  // Experts: column e of U receives weight v_e.
  for (int e = 0; e < num_experts; ++e) {
    const std::vector<Linear>& stack = model.experts[e];
    Eigen::VectorXd delta = trace.gate[e] * dproj;  // final expert layer is linear
    for (int l = static_cast<int>(stack.size()) - 1; l >= 0; --l) {
      Eigen::VectorXd input =
          l == 0 ? ex.features : relu(trace.expert_pre[e][l - 1]);
      grads.experts[e][l].weight += delta * input.transpose();
      grads.experts[e][l].bias += delta;
      if (l > 0) {
        Eigen::VectorXd dprev = stack[l].weight.transpose() * delta;
        delta = dprev.cwiseProduct(relu_mask(trace.expert_pre[e][l - 1]));
      }
    }
  }
}

json tensor_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd tensor_from_json(const json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    fail(ErrorCode::InvalidConfig, "checkpoint tensor size mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[idx++].get<double>();
  return m;
}

}  // namespace

void MmlcConfig::validate() const {
  if (num_experts < 1) fail(ErrorCode::InvalidConfig, "num_experts must be >= 1");
  if (expert_layer_sizes.empty()) fail(ErrorCode::InvalidConfig, "expert_layer_sizes must be non-empty");
  for (int s : expert_layer_sizes)
    if (s < 1) fail(ErrorCode::InvalidConfig, "expert layer sizes must be >= 1");
  if (gate_hidden_size < 1) fail(ErrorCode::InvalidConfig, "gate_hidden_size must be >= 1");
  if (output_hidden_size < 1) fail(ErrorCode::InvalidConfig, "output_hidden_size must be >= 1");
  if (lambda < 0.0) fail(ErrorCode::InvalidConfig, "lambda must be >= 0");
  if (learning_rate <= 0.0) fail(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCode::InvalidConfig, "epochs must be >= 0");
  if (feature_dim < 1) fail(ErrorCode::InvalidConfig, "feature_dim must be resolved before use");
  if (num_workers < 1) fail(ErrorCode::InvalidConfig, "num_workers must be resolved before use");
  if (num_classes < 1) fail(ErrorCode::InvalidConfig, "num_classes must be resolved before use");
}

MmlcParameters init_model(const MmlcConfig& config) {
  config.validate();
  MmlcParameters model;
  model.config = config;

  Rng rng = Rng(config.seed).fork("init");
  auto make_block = [&rng](int out, int in) {
    Linear block;
    block.weight = Eigen::MatrixXd(out, in);
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c)
        block.weight(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
    block.bias = Eigen::VectorXd::Zero(out);
    return block;
  };

  model.experts.resize(config.num_experts);
  for (int e = 0; e < config.num_experts; ++e) {
    int in = config.feature_dim;
    for (int size : config.expert_layer_sizes) {
      model.experts[e].push_back(make_block(size, in));
      in = size;
    }
  }
  model.gate_embed = make_block(config.gate_hidden_size, config.num_workers);
  model.gate_score = make_block(config.num_experts, config.gate_hidden_size);
  model.output_hidden = make_block(config.output_hidden_size, config.spectral_dim());
  model.output_final = make_block(config.num_classes, config.output_hidden_size);
  return model;
}

Eigen::MatrixXd experts_forward(const MmlcParameters& model, const Eigen::VectorXd& features) {
  if (features.size() != model.config.feature_dim)
    fail(ErrorCode::DimensionMismatch, "feature vector does not match model feature_dim");
  Eigen::MatrixXd outputs(model.config.spectral_dim(), model.config.num_experts);
  for (int e = 0; e < model.config.num_experts; ++e) {
    const std::vector<Linear>& stack = model.experts[e];
    Eigen::VectorXd h = features;
    for (size_t l = 0; l < stack.size(); ++l) {
      Eigen::VectorXd z = stack[l].weight * h + stack[l].bias;
      h = (l + 1 < stack.size()) ? relu(z) : z;
    }
    outputs.col(e) = h;
  }
  return outputs;
}

Eigen::VectorXd gate_forward(const MmlcParameters& model, int worker_index) {
  if (worker_index < 0 || worker_index >= model.config.num_workers)
    fail(ErrorCode::IndexOutOfRange, "worker index out of range");
  Eigen::VectorXd pre = model.gate_embed.weight.col(worker_index) + model.gate_embed.bias;
  Eigen::VectorXd hidden = relu(pre);
  return softmax(model.gate_score.weight * hidden + model.gate_score.bias);
}

std::pair<Eigen::VectorXd, ForwardTrace> forward(const MmlcParameters& model,
                                                 const Eigen::VectorXd& features,
                                                 int worker_index) {
  if (features.size() != model.config.feature_dim)
    fail(ErrorCode::DimensionMismatch, "feature vector does not match model feature_dim");
  if (worker_index < 0 || worker_index >= model.config.num_workers)
    fail(ErrorCode::IndexOutOfRange, "worker index out of range");

  ForwardTrace trace;
  trace.expert_pre.resize(model.config.num_experts);
  trace.expert_outputs.resize(model.config.spectral_dim(), model.config.num_experts);
  for (int e = 0; e < model.config.num_experts; ++e) {
    const std::vector<Linear>& stack = model.experts[e];
    Eigen::VectorXd h = features;
    for (size_t l = 0; l < stack.size(); ++l) {
      Eigen::VectorXd z = stack[l].weight * h + stack[l].bias;
      if (l + 1 < stack.size()) {
        trace.expert_pre[e].push_back(z);
        h = relu(z);
      } else {
        h = z;
      }
    }
    trace.expert_outputs.col(e) = h;
  }

  trace.gate_pre = model.gate_embed.weight.col(worker_index) + model.gate_embed.bias;
  trace.gate_hidden = relu(trace.gate_pre);
  trace.gate = softmax(model.gate_score.weight * trace.gate_hidden + model.gate_score.bias);

  trace.projection = trace.expert_outputs * trace.gate;
  trace.output_pre = model.output_hidden.weight * trace.projection + model.output_hidden.bias;
  trace.output_relu = relu(trace.output_pre);
  trace.distribution = softmax(model.output_final.weight * trace.output_relu + model.output_final.bias);
  return {trace.distribution, std::move(trace)};
}

Eigen::VectorXd forward_with_projection(const MmlcParameters& model,
                                        const Eigen::VectorXd& features,
                                        const Eigen::VectorXd& v) {
  if (v.size() != model.config.num_experts)
    fail(ErrorCode::DimensionMismatch, "projection vector does not match num_experts");
  Eigen::VectorXd projection = experts_forward(model, features) * v;
  Eigen::VectorXd hidden = relu(model.output_hidden.weight * projection + model.output_hidden.bias);
  return softmax(model.output_final.weight * hidden + model.output_final.bias);
}

double frobenius_norm(const MmlcParameters& model) {
  double sq = 0.0;
  for_each_block(model, [&sq](const Linear& b) { sq += b.weight.squaredNorm(); });
  return std::sqrt(sq);
}

double loss(const MmlcParameters& model, const Batch& batch) {
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "loss of an empty batch");
  double ce = 0.0;
  for (const LabeledExample& ex : batch) {
    if (ex.label < 0 || ex.label >= model.config.num_classes)
      fail(ErrorCode::IndexOutOfRange, "label out of range");
    auto [dist, trace] = forward(model, ex.features, ex.worker);
    ce -= std::log(std::max(dist[ex.label], 1e-12));
  }
  ce /= static_cast<double>(batch.size());
  return ce + model.config.lambda * frobenius_norm(model);
}

MmlcGradients grad(const MmlcParameters& model, const Batch& batch, double* loss_out) {
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "gradient of an empty batch");
  MmlcGradients grads = zeros_like(model);
  double ce = 0.0;
  for (const LabeledExample& ex : batch) {
    if (ex.label < 0 || ex.label >= model.config.num_classes)
      fail(ErrorCode::IndexOutOfRange, "label out of range");
    auto [dist, trace] = forward(model, ex.features, ex.worker);
    ce -= std::log(std::max(dist[ex.label], 1e-12));
    backprop_example(model, ex, trace, grads);
  }
  double scale = 1.0 / static_cast<double>(batch.size());
  for_each_block(grads, [scale](Linear& b) {
    b.weight *= scale;
    b.bias *= scale;
  });

  if (model.config.lambda > 0.0) {
    double norm = frobenius_norm(model);
    if (norm > 0.0) {
      double coeff = model.config.lambda / norm;
      std::vector<const Linear*> pblocks = block_pointers(model);
      std::vector<Linear*> gblocks = block_pointers(grads);
      for (size_t b = 0; b < pblocks.size(); ++b)
        gblocks[b]->weight += coeff * pblocks[b]->weight;
    }
  }
  if (loss_out != nullptr)
    *loss_out = ce / static_cast<double>(batch.size()) +
                model.config.lambda * frobenius_norm(model);
  return grads;
}

std::pair<MmlcParameters, TrainingLog> train(MmlcParameters model, const CrowdDataset& dataset) {
  model.config.validate();
  require_model_matches(model, dataset);

  TrainingLog log;
  MmlcGradients moment1 = zeros_like(model);
  MmlcGradients moment2 = zeros_like(model);
  std::vector<Linear*> params = block_pointers(model);
  std::vector<Linear*> m1 = block_pointers(moment1);
  std::vector<Linear*> m2 = block_pointers(moment2);

  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  const double lr = model.config.learning_rate;
  long step = 0;

  Rng shuffle_rng = Rng(model.config.seed).fork("train-shuffle");
  std::vector<int> order(dataset.num_labels());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < model.config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int num_batches = 0;
    for (size_t start = 0; start < order.size(); start += model.config.batch_size) {
      size_t stop = std::min(order.size(), start + model.config.batch_size);
      Batch batch;
      batch.reserve(stop - start);
      for (size_t pos = start; pos < stop; ++pos) {
        const LabelTriple& t = dataset.labels()[order[pos]];
        batch.push_back({dataset.feature(t.item), t.worker, t.label});
      }
      double batch_loss = 0.0;
      MmlcGradients grads = grad(model, batch, &batch_loss);
      loss_sum += batch_loss;
      ++num_batches;

      ++step;
      double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      std::vector<Linear*> gblocks = block_pointers(grads);
      auto adam = [&](auto& w, auto& m, auto& v, const auto& g) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        w -= lr * (m / corr1).cwiseQuotient(((v / corr2).cwiseSqrt().array() + eps).matrix());
      };
      for (size_t b = 0; b < params.size(); ++b) {
        adam(params[b]->weight, m1[b]->weight, m2[b]->weight, gblocks[b]->weight);
        adam(params[b]->bias, m1[b]->bias, m2[b]->bias, gblocks[b]->bias);
      }
    }
    log.epoch_mean_loss.push_back(loss_sum / std::max(1, num_batches));
  }
  return {std::move(model), std::move(log)};
}

std::vector<MissingPrediction> predict_missing(const MmlcParameters& model,
                                               const CrowdDataset& dataset) {
  require_model_matches(model, dataset);
  std::vector<MissingPrediction> predictions;
  for (int i = 0; i < dataset.num_items(); ++i) {
    Eigen::MatrixXd expert_outputs = experts_forward(model, dataset.feature(i));
    for (int j = 0; j < dataset.num_workers(); ++j) {
      if (dataset.is_labeled(i, j)) continue;
      Eigen::VectorXd v = gate_forward(model, j);
      Eigen::VectorXd projection = expert_outputs * v;
      Eigen::VectorXd hidden =
          relu(model.output_hidden.weight * projection + model.output_hidden.bias);
      Eigen::VectorXd dist =
          softmax(model.output_final.weight * hidden + model.output_final.bias);
      predictions.push_back({i, j, argmax_lowest(dist), std::move(dist)});
    }
  }
  return predictions;
}

void require_model_matches(const MmlcParameters& model, const CrowdDataset& dataset) {
  if (model.config.feature_dim != dataset.feature_dim())
    fail(ErrorCode::DimensionMismatch, "model feature_dim does not match dataset");
  if (model.config.num_classes != dataset.num_classes())
    fail(ErrorCode::DimensionMismatch, "model num_classes does not match dataset");
  if (model.worker_ids != dataset.worker_ids())
    fail(ErrorCode::UnknownWorker, "model worker registry does not match dataset");
}

void save_model(const MmlcParameters& model, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["config"] = {
      {"num_experts", model.config.num_experts},
      {"expert_layer_sizes", model.config.expert_layer_sizes},
      {"gate_hidden_size", model.config.gate_hidden_size},
      {"output_hidden_size", model.config.output_hidden_size},
      {"lambda", model.config.lambda},
      {"learning_rate", model.config.learning_rate},
      {"batch_size", model.config.batch_size},
      {"epochs", model.config.epochs},
      {"seed", model.config.seed},
      {"feature_dim", model.config.feature_dim},
      {"num_workers", model.config.num_workers},
      {"num_classes", model.config.num_classes},
  };
  j["worker_ids"] = model.worker_ids;
  json blocks = json::array();
  for_each_block(model, [&blocks](const Linear& b) {
    json bias = json::array();
    for (Eigen::Index i = 0; i < b.bias.size(); ++i) bias.push_back(b.bias[i]);
    blocks.push_back(json{{"weight", tensor_to_json(b.weight)}, {"bias", std::move(bias)}});
  });
  j["blocks"] = std::move(blocks);

  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << "\n";
}

MmlcParameters load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRow, "checkpoint parse error: " + std::string(e.what()));
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      fail(ErrorCode::InvalidConfig, "unsupported checkpoint format version");
    MmlcConfig config;
    const json& c = j.at("config");
    config.num_experts = c.at("num_experts").get<int>();
    config.expert_layer_sizes = c.at("expert_layer_sizes").get<std::vector<int>>();
    config.gate_hidden_size = c.at("gate_hidden_size").get<int>();
    config.output_hidden_size = c.at("output_hidden_size").get<int>();
    config.lambda = c.at("lambda").get<double>();
    config.learning_rate = c.at("learning_rate").get<double>();
    config.batch_size = c.at("batch_size").get<int>();
    config.epochs = c.at("epochs").get<int>();
    config.seed = c.at("seed").get<uint64_t>();
    config.feature_dim = c.at("feature_dim").get<int>();
    config.num_workers = c.at("num_workers").get<int>();
    config.num_classes = c.at("num_classes").get<int>();

    MmlcParameters model = init_model(config);
    model.worker_ids = j.at("worker_ids").get<std::vector<std::string>>();
    if (static_cast<int>(model.worker_ids.size()) != config.num_workers)
      fail(ErrorCode::InvalidConfig, "checkpoint worker list does not match num_workers");

    const json& blocks = j.at("blocks");
    size_t idx = 0;
    bool shape_ok = true;
    for_each_block(model, [&](Linear& b) {
      if (idx >= blocks.size()) {
        shape_ok = false;
        return;
      }
      const json& jb = blocks[idx++];
      Eigen::MatrixXd w = tensor_from_json(jb.at("weight"));
      if (w.rows() != b.weight.rows() || w.cols() != b.weight.cols()) {
        shape_ok = false;
        return;
      }
      b.weight = std::move(w);
      const json& bias = jb.at("bias");
      if (static_cast<Eigen::Index>(bias.size()) != b.bias.size()) {
        shape_ok = false;
        return;
      }
      for (Eigen::Index i = 0; i < b.bias.size(); ++i) b.bias[i] = bias[i].get<double>();
    });
    if (!shape_ok || idx != blocks.size())
      fail(ErrorCode::InvalidConfig, "checkpoint tensors do not match the declared architecture");
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, "checkpoint field error: " + std::string(e.what()));
  }
}

}  // namespace mmlc
