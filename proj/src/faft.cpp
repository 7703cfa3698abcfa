#include "fltlab/faft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fltlab/parallel.hpp"

namespace fltlab {

namespace {

// Rows per evaluation block; a multiple of d keeps per-tile scaling identical
// no matter how blocks are spread over threads.
Index block_rows(int d) {
  const Index base = 256;
  return ((base + d - 1) / d) * d;
}

Matrix effective_weight(const Matrix& w, const std::optional<FaultSite>& fault, int d, const FloatFormat& fmt) {
  Matrix out = round_to_format(w, fmt);
  if (!fault || fault->kind != FaultKind::WeightRegister) return out;
  for (Index r = fault->pe_row; r < out.rows(); r += d)
    for (Index c = fault->pe_col; c < out.cols(); c += d) out(r, c) = apply_fault(out(r, c), fmt, fault->bit);
  return out;
}

std::vector<Index> iota_indices(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

void check_labels(const ForwardCache& cache, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(cache.logits.rows()) != labels.size()) {
    throw std::domain_error("label count does not match the batch");
  }
}

void train_epoch(FcnModel& model, const Dataset& data, std::vector<Index>& order, std::mt19937_64& rng,
                 const TrainConfig& cfg, const std::optional<FaultSite>& fault, int d, const FloatFormat* fmt) {
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
    const Dataset batch = data.subset(std::vector<Index>(order.begin() + start, order.begin() + end));
    const ForwardCache cache =
        fmt ? forward_faulty(model, batch.images, fault, d, *fmt) : forward_reference(model, batch.images);
    sgd_step(model, backward_straight_through(model, cache, batch.labels), cfg.learning_rate);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::domain_error("learning_rate must be > 0");
  if (batch_size < 1) throw std::domain_error("batch_size must be >= 1");
  if (max_epochs < 1) throw std::domain_error("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw std::domain_error("early_stop_patience must be >= 1");
  if (subset_size < 1) throw std::domain_error("subset_size must be >= 1");
}

ForwardCache forward_faulty(const FcnModel& model, const Matrix& batch, const std::optional<FaultSite>& fault,
                            int d, const FloatFormat& fmt) {
  model.validate();
  if (batch.cols() != model.input_dim()) {
    throw std::domain_error("forward_faulty: batch width " + std::to_string(batch.cols()) + " != input width " +
                            std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  Matrix a = round_to_format(batch, fmt);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const bool hidden = l + 1 < model.layers.size();
    Matrix z = tiled_mm(a, round_to_format(layer.weight, fmt), d, fault, 0.0, fmt);
    for (Index i = 0; i < z.rows(); ++i)
      for (Index j = 0; j < z.cols(); ++j)
        z(i, j) = round_to_format(z(i, j) + round_to_format(layer.bias(j), fmt), fmt);
    cache.inputs.push_back(a);
    cache.weights.push_back(effective_weight(layer.weight, fault, d, fmt));
    a = hidden ? relu(z) : z;
    cache.pre.push_back(std::move(z));
  }
  cache.logits = a;
  return cache;
}

ForwardCache forward_reference(const FcnModel& model, const Matrix& batch) {
  model.validate();
  if (batch.cols() != model.input_dim()) throw std::domain_error("forward_reference: batch width mismatch");
  ForwardCache cache;
  Matrix a = batch;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    Matrix z = (a * layer.weight).rowwise() + layer.bias;
    cache.inputs.push_back(a);
    cache.weights.push_back(layer.weight);
    a = l + 1 < model.layers.size() ? relu(z) : z;
    cache.pre.push_back(std::move(z));
  }
  cache.logits = a;
  return cache;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

Gradients backward_from_logits(const FcnModel& model, const ForwardCache& cache, const Matrix& dlogits) {
  const std::size_t n_layers = model.layers.size();
  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);
  Matrix dz = dlogits;
  for (std::size_t l = n_layers; l-- > 0;) {
    g.weight[l] = cache.inputs[l].transpose() * dz;
    g.bias[l] = dz.colwise().sum();
    if (l == 0) break;
    Matrix da = dz * cache.weights[l].transpose();
    dz = (cache.pre[l - 1].array() > 0.0).select(da, 0.0);
  }
  return g;
}

Gradients backward_straight_through(const FcnModel& model, const ForwardCache& cache,
                                    const std::vector<int>& labels) {
  check_labels(cache, labels);
  const Matrix& logits = cache.logits;
  const double n = static_cast<double>(logits.rows());
  Matrix dlogits(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp().transpose();
    dlogits.row(i) = (e / e.sum()).transpose().matrix();
    dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  dlogits /= n;
  Gradients g = backward_from_logits(model, cache, dlogits);
  g.loss = softmax_cross_entropy(logits, labels);
  return g;
}

void sgd_step(FcnModel& model, const Gradients& grads, double learning_rate) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    model.layers[l].weight -= learning_rate * grads.weight[l];
    model.layers[l].bias -= learning_rate * grads.bias[l];
  }
}

Matrix mitigated_forward(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault,
                         std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt) {
  if (fault && mitigation) {
    switch (*mitigation) {
      case MitigationChoice::ISc:
      case MitigationChoice::IScSh: return iscsh_inference(model, x, *fault, d, fmt);
      case MitigationChoice::ETOps: return etops_inference(model, x, *fault, d, fmt);
      default: break;
    }
  }
  return simulated_forward(model, x, fault, d, fmt);
}

std::vector<int> predict(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault,
                         std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt, int jobs) {
  const Index block = block_rows(d);
  const std::size_t blocks = static_cast<std::size_t>((x.rows() + block - 1) / block);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  parallel_for(blocks, jobs, [&](std::size_t b) {
    const Index start = static_cast<Index>(b) * block;
    const Index rows = std::min(block, x.rows() - start);
    const std::vector<int> part =
        argmax_rows(mitigated_forward(model, x.middleRows(start, rows), fault, mitigation, d, fmt));
    std::copy(part.begin(), part.end(), out.begin() + start);
  });
  return out;
}

double evaluate(const FcnModel& model, const Dataset& data, const std::optional<FaultSite>& fault,
                std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt, int jobs) {
  if (data.size() == 0) return 0.0;
  const std::vector<int> pred = predict(model, data.images, fault, mitigation, d, fmt, jobs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

FaftResult faft(const FcnModel& model, const Dataset& train, const Dataset& holdout, const FaultSite& fault, int d,
                const FloatFormat& fmt, const TrainConfig& cfg, int jobs) {
  cfg.validate();
  validate(fault, d, fmt);
  if (select_mitigation(fmt, fault) != MitigationChoice::FaFT) {
    throw std::domain_error("faft: bit " + std::to_string(fault.bit.bit_position) +
                            " is not a fine-tuning fault; use " +
                            std::string(to_string(select_mitigation(fmt, fault))));
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> order = iota_indices(train.size());
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.subset_size)));

  FaftResult result{model, 0.0, 0.0, 0, 0};
  result.initial_accuracy = evaluate(model, holdout, fault, std::nullopt, d, fmt, jobs);
  result.best_accuracy = result.initial_accuracy;

  FcnModel current = model;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    train_epoch(current, train, order, rng, cfg, fault, d, &fmt);
    result.epochs_run = epoch;
    const double acc = evaluate(current, holdout, fault, std::nullopt, d, fmt, jobs);
    if (acc > result.best_accuracy) {
      result.best_accuracy = acc;
      result.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  return result;
}

FcnModel train_baseline(const std::vector<Index>& dims, const Dataset& train, const TrainConfig& cfg) {
  cfg.validate();
  if (dims.empty() || dims.front() != train.images.cols()) {
    throw std::domain_error("train_baseline: first layer width does not match the data");
  }
  FcnModel model = random_model(dims, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<Index> order = iota_indices(train.size());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    train_epoch(model, train, order, rng, cfg, std::nullopt, 1, nullptr);
  }
  for (Layer& layer : model.layers) {
    layer.weight = round_to_format(layer.weight, kFloat32);
    layer.bias = layer.bias.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  }
  return model;
}

}  // namespace fltlab
