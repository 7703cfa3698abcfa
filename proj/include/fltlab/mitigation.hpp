#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fltlab/model.hpp"
#include "fltlab/systolic.hpp"

namespace fltlab {

enum class MitigationChoice { NoneNeeded, FaFT, ISc, IScSh, ETOps, Unmitigable };

std::string_view to_string(MitigationChoice choice);
MitigationChoice parse_mitigation(std::string_view text);

/// Technique for a single stuck bit, by bit field, fault kind and polarity.
MitigationChoice select_mitigation(const FloatFormat& fmt, const FaultSite& fault);

/// True for the mantissa bits whose faults call for fine tuning.
bool is_high_mantissa(const FloatFormat& fmt, int bit);

enum class ScalingOp {
  ShiftBias,     // preload b = (-1)^s into the accumulators
  ScaleW_unit,   // weight tiles into [-1, 1]
  ScaleW_overD,  // weight tiles into [-1/d, 1/d]
  ScaleA_unit,   // activation tiles into [-1, 1]
  ScaleA_c,      // activation tiles into [-c, c]
  ScaleW_c,      // weight tiles into [-c, c]
};
using ScalingOps = std::set<ScalingOp>;

std::string_view to_string(ScalingOp op);

/// Operations listed for a fault type in the requirements table. Weight
/// register exponent stuck-at-0 maps to {ScaleW_c}. Throws std::domain_error
/// for faults that scaling does not handle.
ScalingOps required_operations(const FloatFormat& fmt, const FaultSite& fault);

/// Operations iscsh_inference actually applies. Adds ScaleA_c to down-link
/// exponent faults so partial sums stay below c, and ScaleW_overD to
/// down-link sign faults so a d-deep column of partial sums stays in [-1, 1]
/// before the shift.
ScalingOps effective_operations(const FloatFormat& fmt, const FaultSite& fault);

/// Largest magnitude in `m`, or 1 when every element is zero.
template <typename Derived>
double abs_max(const Eigen::MatrixBase<Derived>& m) {
  const double v = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  return v == 0.0 ? 1.0 : v;
}

/// Tiles scaled into [-bound, bound] plus the per-tile abs-max factors.
struct ScaledTiles {
  TileGrid tiles;
  Matrix factors;  // grid_rows x grid_cols
};

/// c * A / abs_max(A) per tile, rounded to `fmt`.
ScaledTiles scale_input_tiles(const TileGrid& a, double c, const FloatFormat& fmt = kFloat32);

/// W / (d * abs_max(W)) per tile, rounded to `fmt`.
ScaledTiles scale_weight_tiles(const TileGrid& w, int d, const FloatFormat& fmt = kFloat32);

/// bound * M / abs_max(M) per tile, rounded to `fmt`.
ScaledTiles scale_tiles(const TileGrid& m, double bound, const FloatFormat& fmt);

/// (-1)^s for a down-link sign fault stuck at s, 0 without one.
double shift_bias(std::optional<int> sign_stuck_value);

/// (u - b) * a_factor * w_factor * d. `d` is the reciprocal of the weight
/// bound the tile was scaled to: the array dimension for [-1/d, 1/d].
Matrix unscale_partial(const Eigen::Ref<const Matrix>& u_tilde, double b, double a_factor, double w_factor,
                       double d);

/// c * A / abs_max(A) per tile; the stored factors are abs_max(A) / c.
ScaledTiles rescale_activations(const TileGrid& a_tilde, double c, const FloatFormat& fmt = kFloat32);

Matrix final_unscale(const Matrix& a_tilde, double c);

/// Constants and per-tile factors of one mitigated inference.
struct ScalingPlan {
  double c = 1.0;
  int d = 1;
  ScalingOps ops;
  double bias_b = 0.0;
  Matrix input_factors;
  std::vector<Matrix> weight_factors;
};

/// Builds the plan for `model` on input `x`: c from the faulty bit when an
/// exponent scaling is needed, per-tile factors of the first activation and
/// of every weight matrix.
ScalingPlan make_scaling_plan(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                              const FloatFormat& fmt);

/// Runs the network on the faulty array with invertible scaling and
/// shifting. Biases and ReLU run outside the array. Throws std::domain_error
/// unless the fault is an ISc or IScSh case.
Matrix iscsh_inference(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                       const FloatFormat& fmt);

/// Forward pass through the simulated array with no mitigation. Inputs,
/// weights and biases are rounded to `fmt`; bias add and ReLU run outside
/// the array.
Matrix simulated_forward(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault, int d,
                         const FloatFormat& fmt);

struct ETOpsPlan {
  enum class Action { NoAction, RowSwap, ColumnInversion };
  Action action = Action::NoAction;
  int row_a = -1;  // RowSwap: the faulty row
  int row_b = -1;  // RowSwap: the row swapped into it
  int column = -1; // ColumnInversion: inverted weight column
  bool negate_output_column = false;
};

/// Picks the tile transform that makes the weight seen by a sign-faulty
/// register carry the stuck sign. Zero counts as matching either sign.
ETOpsPlan etops_plan(const Eigen::Ref<const Matrix>& w_tile, const FaultSite& fault);

/// Applies `plan` to copies of the tiles, multiplies on the faulty array and
/// undoes the output transform.
Matrix etops_execute(const Eigen::Ref<const Matrix>& a_tile, const Eigen::Ref<const Matrix>& w_tile,
                     const ETOpsPlan& plan, const FaultSite& fault, const FloatFormat& fmt);

/// Tiled product with a fresh ETOps plan for every weight tile.
Matrix etops_tiled_mm(const Matrix& a, const Matrix& w, int d, const FaultSite& fault, const FloatFormat& fmt);

/// simulated_forward with every layer product routed through etops_tiled_mm.
Matrix etops_inference(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                       const FloatFormat& fmt);

enum class FcClass { Single, FC1, FC2, FC3, FC4, FC5, Unsupported };

std::string_view to_string(FcClass cls);
FcClass parse_fc_class(std::string_view text);

struct FaultCombination {
  FcClass cls = FcClass::Unsupported;
  std::optional<int> effective_bit;  // FC1: lowest faulty exponent position
};

/// Classifies several stuck bits present together. Throws std::domain_error
/// on an empty list.
FaultCombination classify_fault_combination(const std::vector<FaultSite>& faults, const FloatFormat& fmt);

enum class BerSite { Link, WeightRegister };

std::string_view to_string(BerSite site);
BerSite parse_ber_site(std::string_view text);

class Unmitigable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fraction of all link (2 d^2 instances) or register (d^2 instances) bits
/// that may be stuck while the combination stays mitigable. Throws
/// Unmitigable for FC4, FC5 and Unsupported.
double max_mitigated_ber(FcClass cls, BerSite site, int d, const FloatFormat& fmt);

/// `value` rounded half-up to `digits` significant figures.
double round_sig(double value, int digits);

/// The BER as the published tables quote it: the single-fault rate rounded
/// to three figures, scaled by the number of tolerated faults and rounded
/// again. Differs from max_mitigated_ber in the last quoted digit of a few
/// cells.
double quoted_max_mitigated_ber(FcClass cls, BerSite site, int d, const FloatFormat& fmt);

}  // namespace fltlab
