#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fltlab/idx.hpp"
#include "fltlab/model.hpp"
#include "fltlab/report.hpp"
#include "fltlab/systolic.hpp"

namespace fltlab {

struct SweepConfig {
  FloatFormat format = kFloat32;
  int tile_dim = 8;
  std::vector<FaultKind> kinds{FaultKind::RightLink, FaultKind::DownLink, FaultKind::WeightRegister};
  std::vector<int> bits;
  std::vector<int> stuck_values{0, 1};
  int pe_stride = 1;           // PEs sampled at flat indices 0, stride, 2*stride, ... of d*d
  Index sample_limit = 0;      // 0 keeps every test sample
  bool mitigate = false;       // also run the selected scaling or tile technique
  std::uint64_t seed = 1;      // picks the sample subset when sample_limit is set
  int jobs = 1;

  /// Throws std::domain_error naming the offending field.
  void validate() const;
};

/// PE coordinates visited for a d x d array at the given stride.
std::vector<std::pair<int, int>> sampled_pes(int tile_dim, int stride);

/// Evaluates every (kind, bit, stuck value, sampled PE) cell on `data`.
/// Cells run on cfg.jobs threads and are merged in cell order, followed by
/// mean and min rows per (kind, bit, stuck value, mitigation) group. The
/// output depends only on the inputs and the seed.
SweepReport run_sweep(const SweepConfig& cfg, const FcnModel& model, const Dataset& data);

/// run_sweep on files: a FLTLAB01 model and an IDX image/label pair.
SweepReport run_sweep(const SweepConfig& cfg, const std::filesystem::path& model_path,
                      const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Parses "3", "0-7", "0-3,22,30" into bit positions.
std::vector<int> parse_bit_list(const std::string& text);

}  // namespace fltlab
