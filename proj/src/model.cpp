#include "fltlab/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace fltlab {

std::vector<Index> FcnModel::dims() const {
  std::vector<Index> out;
  if (layers.empty()) return out;
  out.push_back(input_dim());
  for (const auto& layer : layers) out.push_back(layer.out_dim());
  return out;
}

void FcnModel::validate() const {
  if (layers.empty()) throw std::domain_error("model has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.bias.size() != layer.out_dim()) {
      throw std::domain_error("layer " + std::to_string(l) + ": bias length " + std::to_string(layer.bias.size()) +
                              " != output width " + std::to_string(layer.out_dim()));
    }
    if (l > 0 && layers[l - 1].out_dim() != layer.in_dim()) {
      throw std::domain_error("layer " + std::to_string(l) + ": input width " + std::to_string(layer.in_dim()) +
                              " does not chain with previous output width " +
                              std::to_string(layers[l - 1].out_dim()));
    }
  }
}

FcnModel random_model(const std::vector<Index>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::domain_error("random_model: need at least two layer widths");
  std::mt19937_64 rng(seed);
  FcnModel model;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{Matrix(dims[l], dims[l + 1]), RowVector::Zero(dims[l + 1])};
    for (Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = static_cast<float>(dist(rng));
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Matrix reference_forward(const FcnModel& model, const Matrix& x) {
  model.validate();
  if (x.cols() != model.input_dim()) throw std::domain_error("reference_forward: input width mismatch");
  Matrix a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    Matrix z = (a * layer.weight).rowwise() + layer.bias;
    a = l + 1 < model.layers.size() ? relu(z) : z;
  }
  return a;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    // NaN never wins, so a row of NaNs from a catastrophic fault maps to class 0.
    Index best = 0;
    for (Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best) || (std::isnan(m(i, best)) && !std::isnan(m(i, j)))) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace fltlab
