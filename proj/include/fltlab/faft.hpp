#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fltlab/idx.hpp"
#include "fltlab/mitigation.hpp"
#include "fltlab/model.hpp"

namespace fltlab {

struct TrainConfig {
  double learning_rate = 1e-2;
  int batch_size = 64;
  int max_epochs = 20;
  int early_stop_patience = 3;
  int subset_size = 1000;
  std::uint64_t seed = 1;

  /// Throws std::domain_error naming the first field out of range.
  void validate() const;
};

/// Values a forward pass saw, kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;   // activation entering each layer
  std::vector<Matrix> weights;  // weight each layer effectively used
  std::vector<Matrix> pre;      // pre-activation of each layer
  Matrix logits;
};

/// Forward pass on the simulated array with `fault` present in every layer
/// product. For a weight-register fault the cached weights carry the stuck
/// bit at every tile position the register covers.
ForwardCache forward_faulty(const FcnModel& model, const Matrix& batch, const std::optional<FaultSite>& fault,
                            int d, const FloatFormat& fmt);

/// Double-precision forward pass that fills the same cache.
ForwardCache forward_reference(const FcnModel& model, const Matrix& batch);

/// Mean softmax cross-entropy of `logits` against `labels`.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;
  double loss = 0.0;
};

/// Backpropagation of the mean cross-entropy through the cached values. The
/// fault operator is treated as the identity, so gradients flow through the
/// faulty activations and weights unchanged.
Gradients backward_straight_through(const FcnModel& model, const ForwardCache& cache, const std::vector<int>& labels);

/// Gradient with a caller-supplied upstream gradient on the logits.
Gradients backward_from_logits(const FcnModel& model, const ForwardCache& cache, const Matrix& dlogits);

void sgd_step(FcnModel& model, const Gradients& grads, double learning_rate);

/// Output of the network on the simulated array with the given fault and
/// mitigation. ISc and IScSh run invertible scaling, ETOps runs tile
/// transforms, everything else runs the plain faulty array.
Matrix mitigated_forward(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault,
                         std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt);

/// Top-1 accuracy on the simulated array. Rows are processed in fixed
/// blocks spread over `jobs` threads, so the result does not depend on jobs.
double evaluate(const FcnModel& model, const Dataset& data, const std::optional<FaultSite>& fault,
                std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt, int jobs = 1);

/// Predicted classes under the same configuration as evaluate.
std::vector<int> predict(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault,
                         std::optional<MitigationChoice> mitigation, int d, const FloatFormat& fmt, int jobs = 1);

struct FaftResult {
  FcnModel model;            // best checkpoint
  double initial_accuracy;   // held-out accuracy before tuning, fault present
  double best_accuracy;      // held-out accuracy of the returned model
  int epochs_run;
  int best_epoch;            // 0 when no epoch improved on the start
};

/// Fault-aware fine tuning: SGD on a seeded subset of `train` with the fault
/// in every forward pass, early stopping on faulty accuracy over `holdout`.
/// Throws std::domain_error unless the fault calls for fine tuning.
FaftResult faft(const FcnModel& model, const Dataset& train, const Dataset& holdout, const FaultSite& fault, int d,
                const FloatFormat& fmt, const TrainConfig& cfg, int jobs = 1);

/// Fault-free SGD training in double precision for cfg.max_epochs epochs
/// over all of `train`, reshuffled each epoch with cfg.seed. No early
/// stopping; cfg.subset_size is ignored. Parameters are rounded to f32 at
/// the end.
FcnModel train_baseline(const std::vector<Index>& dims, const Dataset& train, const TrainConfig& cfg);

}  // namespace fltlab
