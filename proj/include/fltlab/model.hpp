#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "fltlab/systolic.hpp"

namespace fltlab {

using RowVector = Eigen::RowVectorXd;

/// One dense layer computing x * weight + bias, with weight stored in x out.
struct Layer {
  Matrix weight;
  RowVector bias;

  Index in_dim() const { return weight.rows(); }
  Index out_dim() const { return weight.cols(); }
};

/// Fully connected network with ReLU on every hidden layer and raw logits
/// out of the last one.
struct FcnModel {
  std::vector<Layer> layers;

  Index input_dim() const { return layers.front().in_dim(); }
  Index output_dim() const { return layers.back().out_dim(); }
  std::vector<Index> dims() const;

  /// Throws std::domain_error if the layers do not chain or a bias length is off.
  void validate() const;
};

/// He-uniform weights and zero biases, every parameter rounded to f32 so the
/// model survives a save/load round trip bit-exactly.
FcnModel random_model(const std::vector<Index>& dims, std::uint64_t seed);

inline const std::vector<Index> kMnistDims{784, 128, 64, 10};

template <typename Derived>
Matrix relu(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseMax(0.0);
}

/// Plain double-precision forward pass without the array simulator.
Matrix reference_forward(const FcnModel& model, const Matrix& x);

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace fltlab
