#include "fltlab/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace fltlab {

namespace {

bool is_sign_fault(const FloatFormat& fmt, const FaultSite& f) { return f.bit.bit_position == fmt.sign_bit(); }

bool is_exponent_fault(const FloatFormat& fmt, const FaultSite& f) {
  return field_of(fmt, f.bit.bit_position) == BitField::Exponent;
}

// Weight or activation bound selected by a set of scaling operations.
struct Bounds {
  std::optional<double> activation;
  std::optional<double> weight;
};

Bounds bounds_for(const ScalingOps& ops, double c, int d) {
  Bounds b;
  if (ops.count(ScalingOp::ScaleA_c)) {
    b.activation = c;
  } else if (ops.count(ScalingOp::ScaleA_unit)) {
    b.activation = 1.0;
  }
  if (ops.count(ScalingOp::ScaleW_overD)) {
    b.weight = 1.0 / d;
  } else if (ops.count(ScalingOp::ScaleW_c)) {
    b.weight = c;
  } else if (ops.count(ScalingOp::ScaleW_unit)) {
    b.weight = 1.0;
  }
  return b;
}

double scaling_constant_for(const FloatFormat& fmt, const FaultSite& fault) {
  return is_exponent_fault(fmt, fault) ? scale_constant(fmt, fault.bit.bit_position) : 1.0;
}

// Accumulates partial tiles over the inner index, rounding every sum to fmt.
void accumulate_tile(Eigen::Ref<Matrix> acc, const Matrix& partial, bool first, const FloatFormat& fmt) {
  if (first) {
    acc = partial;
    return;
  }
  for (Index i = 0; i < acc.rows(); ++i)
    for (Index j = 0; j < acc.cols(); ++j) acc(i, j) = round_to_format(acc(i, j) + partial(i, j), fmt);
}

void require_sign_register(const FloatFormat& fmt, const FaultSite& fault) {
  if (fault.kind != FaultKind::WeightRegister || !is_sign_fault(fmt, fault)) {
    throw std::domain_error("ETOps handles weight-register sign faults only");
  }
}

// Bias add and optional ReLU outside the array, rounded to fmt.
Matrix add_bias(const Matrix& z, const RowVector& bias, bool hidden, const FloatFormat& fmt) {
  Matrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) {
      const double v = round_to_format(z(i, j) + round_to_format(bias(j), fmt), fmt);
      out(i, j) = hidden ? std::max(v, 0.0) : v;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(MitigationChoice choice) {
  switch (choice) {
    case MitigationChoice::NoneNeeded: return "none";
    case MitigationChoice::FaFT: return "faFT";
    case MitigationChoice::ISc: return "ISc";
    case MitigationChoice::IScSh: return "IScSh";
    case MitigationChoice::ETOps: return "ETOps";
    case MitigationChoice::Unmitigable: return "unmitigable";
  }
  return "?";
}

MitigationChoice parse_mitigation(std::string_view text) {
  for (auto c : {MitigationChoice::NoneNeeded, MitigationChoice::FaFT, MitigationChoice::ISc,
                 MitigationChoice::IScSh, MitigationChoice::ETOps, MitigationChoice::Unmitigable}) {
    if (text == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown mitigation '" + std::string(text) + "'");
}

bool is_high_mantissa(const FloatFormat& fmt, int bit) {
  if (field_of(fmt, bit) != BitField::Mantissa) return false;
  switch (fmt.name) {
    case FormatName::f32: return bit == 22;
    case FormatName::f16: return bit == 9;
    case FormatName::bf16: return bit >= 4;
  }
  return false;
}

MitigationChoice select_mitigation(const FloatFormat& fmt, const FaultSite& fault) {
  const int bit = fault.bit.bit_position;
  switch (field_of(fmt, bit)) {
    case BitField::Mantissa:
      return is_high_mantissa(fmt, bit) ? MitigationChoice::FaFT : MitigationChoice::NoneNeeded;
    case BitField::Exponent:
      return fault.bit.stuck_value == 0 ? MitigationChoice::IScSh : MitigationChoice::Unmitigable;
    case BitField::Sign:
      switch (fault.kind) {
        case FaultKind::RightLink: return MitigationChoice::Unmitigable;
        case FaultKind::DownLink: return MitigationChoice::IScSh;
        case FaultKind::WeightRegister: return MitigationChoice::ETOps;
      }
  }
  return MitigationChoice::Unmitigable;
}

std::string_view to_string(ScalingOp op) {
  switch (op) {
    case ScalingOp::ShiftBias: return "shift_bias";
    case ScalingOp::ScaleW_unit: return "scale_w_unit";
    case ScalingOp::ScaleW_overD: return "scale_w_over_d";
    case ScalingOp::ScaleA_unit: return "scale_a_unit";
    case ScalingOp::ScaleA_c: return "scale_a_c";
    case ScalingOp::ScaleW_c: return "scale_w_c";
  }
  return "?";
}

ScalingOps required_operations(const FloatFormat& fmt, const FaultSite& fault) {
  if (select_mitigation(fmt, fault) != MitigationChoice::IScSh) {
    throw std::domain_error("required_operations: fault is not handled by invertible scaling");
  }
  using enum ScalingOp;
  if (is_sign_fault(fmt, fault)) return {ShiftBias, ScaleW_unit, ScaleA_unit};
  switch (fault.kind) {
    case FaultKind::RightLink: return {ScaleA_unit, ScaleA_c};
    case FaultKind::DownLink: return {ScaleW_unit, ScaleW_overD, ScaleA_unit};
    case FaultKind::WeightRegister: return {ScaleW_c};
  }
  return {};
}

ScalingOps effective_operations(const FloatFormat& fmt, const FaultSite& fault) {
  ScalingOps ops = required_operations(fmt, fault);
  if (fault.kind == FaultKind::DownLink) {
    ops.insert(is_sign_fault(fmt, fault) ? ScalingOp::ScaleW_overD : ScalingOp::ScaleA_c);
  }
  return ops;
}

ScaledTiles scale_tiles(const TileGrid& m, double bound, const FloatFormat& fmt) {
  ScaledTiles out{m, Matrix(m.grid_rows(), m.grid_cols())};
  for (Index i = 0; i < m.grid_rows(); ++i) {
    for (Index j = 0; j < m.grid_cols(); ++j) {
      const double f = abs_max(m.tile(i, j));
      out.factors(i, j) = f;
      out.tiles.tile(i, j) = round_to_format(m.tile(i, j) * (bound / f), fmt);
    }
  }
  return out;
}

ScaledTiles scale_input_tiles(const TileGrid& a, double c, const FloatFormat& fmt) { return scale_tiles(a, c, fmt); }

ScaledTiles scale_weight_tiles(const TileGrid& w, int d, const FloatFormat& fmt) {
  if (d < 1) throw std::domain_error("scale_weight_tiles: d must be >= 1");
  ScaledTiles out{w, Matrix(w.grid_rows(), w.grid_cols())};
  for (Index i = 0; i < w.grid_rows(); ++i) {
    for (Index j = 0; j < w.grid_cols(); ++j) {
      const double f = abs_max(w.tile(i, j));
      out.factors(i, j) = f;
      out.tiles.tile(i, j) = round_to_format(w.tile(i, j) / (d * f), fmt);
    }
  }
  return out;
}

double shift_bias(std::optional<int> sign_stuck_value) {
  if (!sign_stuck_value) return 0.0;
  return *sign_stuck_value == 0 ? 1.0 : -1.0;
}

Matrix unscale_partial(const Eigen::Ref<const Matrix>& u_tilde, double b, double a_factor, double w_factor,
                       double d) {
  return (u_tilde.array() - b).matrix() * (a_factor * w_factor * d);
}

ScaledTiles rescale_activations(const TileGrid& a_tilde, double c, const FloatFormat& fmt) {
  ScaledTiles out = scale_tiles(a_tilde, c, fmt);
  out.factors /= c;
  return out;
}

Matrix final_unscale(const Matrix& a_tilde, double c) { return a_tilde / c; }

ScalingPlan make_scaling_plan(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                              const FloatFormat& fmt) {
  model.validate();
  validate(fault, d, fmt);
  ScalingPlan plan;
  plan.d = d;
  plan.ops = effective_operations(fmt, fault);
  plan.c = scaling_constant_for(fmt, fault);
  if (plan.ops.count(ScalingOp::ShiftBias)) plan.bias_b = shift_bias(fault.bit.stuck_value);

  const Bounds bounds = bounds_for(plan.ops, plan.c, d);
  const TileGrid a = tile(round_to_format(x, fmt), d);
  plan.input_factors = bounds.activation ? scale_tiles(a, *bounds.activation, fmt).factors
                                         : Matrix::Ones(a.grid_rows(), a.grid_cols());
  for (const Layer& layer : model.layers) {
    const TileGrid w = tile(round_to_format(layer.weight, fmt), d);
    plan.weight_factors.push_back(bounds.weight ? scale_tiles(w, *bounds.weight, fmt).factors
                                                : Matrix::Ones(w.grid_rows(), w.grid_cols()));
  }
  return plan;
}

Matrix iscsh_inference(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                       const FloatFormat& fmt) {
  if (x.cols() != model.input_dim()) throw std::domain_error("iscsh_inference: input width mismatch");
  const ScalingPlan plan = make_scaling_plan(model, x, fault, d, fmt);
  const Bounds bounds = bounds_for(plan.ops, plan.c, d);
  const double alpha = bounds.activation.value_or(1.0);
  const double w_recip = bounds.weight ? 1.0 / *bounds.weight : 1.0;

  // S1: scale the input tiles. Unscale, accumulation, bias and ReLU run in
  // double on the host side; only values entering the array are rounded.
  TileGrid a_hat = tile(round_to_format(x, fmt), d);
  Matrix a_factors = plan.input_factors;
  if (bounds.activation) a_hat = scale_tiles(a_hat, alpha, fmt).tiles;

  Matrix a_tilde;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const bool last = l + 1 == model.layers.size();
    TileGrid w_hat = tile(round_to_format(layer.weight, fmt), d);
    if (bounds.weight) w_hat = scale_tiles(w_hat, *bounds.weight, fmt).tiles;
    const Matrix& w_factors = plan.weight_factors[l];

    // S2.1: faulty products, unscaled and accumulated over the inner tiles.
    TileGrid sum = tile(Matrix::Zero(x.rows(), layer.out_dim()), d);
    for_each_partial_tile(a_hat, w_hat, fault, plan.bias_b, fmt,
                          [&](Index ti, Index z, Index tj, const Matrix& partial) {
                            sum.tile(ti, tj) +=
                                unscale_partial(partial, plan.bias_b, a_factors(ti, z), w_factors(z, tj), w_recip);
                          });
    Matrix z = untile(sum);
    z.rowwise() += alpha * layer.bias;
    a_tilde = last ? z : relu(z);
    if (last) break;

    // S2.2: rescale for the next layer.
    a_hat = tile(a_tilde, d);
    if (bounds.activation) {
      ScaledTiles next = rescale_activations(a_hat, alpha, fmt);
      a_hat = std::move(next.tiles);
      a_factors = std::move(next.factors);
    } else {
      a_hat = tile(round_to_format(a_tilde, fmt), d);
      a_factors = Matrix::Ones(a_hat.grid_rows(), a_hat.grid_cols());
    }
  }
  // S3: undo the activation scaling.
  return round_to_format(final_unscale(a_tilde, alpha), fmt);
}

Matrix simulated_forward(const FcnModel& model, const Matrix& x, const std::optional<FaultSite>& fault, int d,
                         const FloatFormat& fmt) {
  model.validate();
  if (x.cols() != model.input_dim()) throw std::domain_error("simulated_forward: input width mismatch");
  Matrix a = round_to_format(x, fmt);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const Matrix z = tiled_mm(a, round_to_format(layer.weight, fmt), d, fault, 0.0, fmt);
    a = add_bias(z, layer.bias, l + 1 < model.layers.size(), fmt);
  }
  return a;
}

ETOpsPlan etops_plan(const Eigen::Ref<const Matrix>& w_tile, const FaultSite& fault) {
  const int x = fault.pe_row;
  const int y = fault.pe_col;
  if (x < 0 || y < 0 || x >= w_tile.rows() || y >= w_tile.cols()) {
    throw std::domain_error("etops_plan: fault PE outside the tile");
  }
  const bool stuck_negative = fault.bit.stuck_value == 1;
  auto matches = [&](double v) { return v == 0.0 || std::signbit(v) == stuck_negative; };

  ETOpsPlan plan;
  if (matches(w_tile(x, y))) return plan;
  for (int j = 0; j < w_tile.rows(); ++j) {
    if (j != x && matches(w_tile(j, y))) {
      plan.action = ETOpsPlan::Action::RowSwap;
      plan.row_a = x;
      plan.row_b = j;
      return plan;
    }
  }
  plan.action = ETOpsPlan::Action::ColumnInversion;
  plan.column = y;
  plan.negate_output_column = true;
  return plan;
}

Matrix etops_execute(const Eigen::Ref<const Matrix>& a_tile, const Eigen::Ref<const Matrix>& w_tile,
                     const ETOpsPlan& plan, const FaultSite& fault, const FloatFormat& fmt) {
  Matrix a = a_tile;
  Matrix w = w_tile;
  switch (plan.action) {
    case ETOpsPlan::Action::NoAction: break;
    case ETOpsPlan::Action::RowSwap:
      w.row(plan.row_a).swap(w.row(plan.row_b));
      a.col(plan.row_a).swap(a.col(plan.row_b));
      break;
    case ETOpsPlan::Action::ColumnInversion: w.col(plan.column) *= -1.0; break;
  }
  Matrix out = systolic_tile_mm(a, w, fault, 0.0, fmt);
  if (plan.negate_output_column) out.col(plan.column) *= -1.0;
  return out;
}

Matrix etops_tiled_mm(const Matrix& a, const Matrix& w, int d, const FaultSite& fault, const FloatFormat& fmt) {
  if (a.cols() != w.rows()) throw std::domain_error("etops_tiled_mm: inner dimensions differ");
  validate(fault, d, fmt);
  require_sign_register(fmt, fault);
  const TileGrid at = tile(a, d);
  const TileGrid wt = tile(w, d);
  TileGrid ct = tile(Matrix::Zero(a.rows(), w.cols()), d);
  for (Index z = 0; z < wt.grid_rows(); ++z) {
    for (Index tj = 0; tj < wt.grid_cols(); ++tj) {
      const ETOpsPlan plan = etops_plan(wt.tile(z, tj), fault);
      for (Index ti = 0; ti < at.grid_rows(); ++ti) {
        accumulate_tile(ct.tile(ti, tj), etops_execute(at.tile(ti, z), wt.tile(z, tj), plan, fault, fmt), z == 0,
                        fmt);
      }
    }
  }
  return untile(ct);
}

Matrix etops_inference(const FcnModel& model, const Matrix& x, const FaultSite& fault, int d,
                       const FloatFormat& fmt) {
  model.validate();
  if (x.cols() != model.input_dim()) throw std::domain_error("etops_inference: input width mismatch");
  Matrix a = round_to_format(x, fmt);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const Matrix z = etops_tiled_mm(a, round_to_format(layer.weight, fmt), d, fault, fmt);
    a = add_bias(z, layer.bias, l + 1 < model.layers.size(), fmt);
  }
  return a;
}

std::string_view to_string(FcClass cls) {
  switch (cls) {
    case FcClass::Single: return "single";
    case FcClass::FC1: return "FC1";
    case FcClass::FC2: return "FC2";
    case FcClass::FC3: return "FC3";
    case FcClass::FC4: return "FC4";
    case FcClass::FC5: return "FC5";
    case FcClass::Unsupported: return "unsupported";
  }
  return "?";
}

FcClass parse_fc_class(std::string_view text) {
  for (auto c : {FcClass::Single, FcClass::FC1, FcClass::FC2, FcClass::FC3, FcClass::FC4, FcClass::FC5,
                 FcClass::Unsupported}) {
    if (text == to_string(c)) return c;
  }
  if (text == "fc1") return FcClass::FC1;
  if (text == "fc2") return FcClass::FC2;
  if (text == "fc3") return FcClass::FC3;
  if (text == "fc4") return FcClass::FC4;
  if (text == "fc5") return FcClass::FC5;
  throw std::invalid_argument("unknown fault combination class '" + std::string(text) + "'");
}

FaultCombination classify_fault_combination(const std::vector<FaultSite>& faults, const FloatFormat& fmt) {
  if (faults.empty()) throw std::domain_error("classify_fault_combination: empty fault list");
  if (faults.size() == 1) return {FcClass::Single, std::nullopt};

  const FaultSite& first = faults.front();
  const bool all_exponent =
      std::all_of(faults.begin(), faults.end(), [&](const FaultSite& f) { return is_exponent_fault(fmt, f); });
  const bool all_sign =
      std::all_of(faults.begin(), faults.end(), [&](const FaultSite& f) { return is_sign_fault(fmt, f); });
  const bool one_kind =
      std::all_of(faults.begin(), faults.end(), [&](const FaultSite& f) { return f.kind == first.kind; });
  if (!one_kind) return {FcClass::Unsupported, std::nullopt};

  if (all_exponent) {
    // Several stuck exponent bits inside one link or register.
    const bool same_site = std::all_of(faults.begin(), faults.end(), [&](const FaultSite& f) {
      return f.pe_row == first.pe_row && f.pe_col == first.pe_col;
    });
    if (!same_site) return {FcClass::Unsupported, std::nullopt};
    const bool one_polarity = std::all_of(faults.begin(), faults.end(), [&](const FaultSite& f) {
      return f.bit.stuck_value == first.bit.stuck_value;
    });
    if (!one_polarity) return {FcClass::FC4, std::nullopt};
    int lowest = first.bit.bit_position;
    for (const FaultSite& f : faults) lowest = std::min(lowest, f.bit.bit_position);
    return {FcClass::FC1, lowest};
  }

  if (all_sign) {
    // Right-link sign faults group by PE row, the others by PE column.
    std::map<int, int> polarity_by_line;
    for (const FaultSite& f : faults) {
      const int line = f.kind == FaultKind::RightLink ? f.pe_row : f.pe_col;
      auto [it, inserted] = polarity_by_line.emplace(line, f.bit.stuck_value);
      if (!inserted && it->second != f.bit.stuck_value) return {FcClass::FC5, std::nullopt};
    }
    return {polarity_by_line.size() == 1 ? FcClass::FC2 : FcClass::FC3, std::nullopt};
  }
  return {FcClass::Unsupported, std::nullopt};
}

std::string_view to_string(BerSite site) { return site == BerSite::Link ? "link" : "weight_register"; }

BerSite parse_ber_site(std::string_view text) {
  if (text == "link") return BerSite::Link;
  if (text == "weight_register" || text == "register") return BerSite::WeightRegister;
  throw std::invalid_argument("unknown BER site '" + std::string(text) + "' (expected link or weight_register)");
}

namespace {

struct BerTerms {
  double single;      // one stuck bit over all bits of the site type
  double tolerated;   // number of stuck bits the class tolerates
};

BerTerms ber_terms(FcClass cls, BerSite site, int d, const FloatFormat& fmt) {
  if (d < 1) throw std::domain_error("max_mitigated_ber: d must be >= 1");
  const double instances = (site == BerSite::Link ? 2.0 : 1.0) * d * d;
  const double single = 1.0 / (instances * fmt.total_bits);
  switch (cls) {
    case FcClass::Single: return {single, 1.0};
    case FcClass::FC1: return {single, static_cast<double>(fmt.exponent_bits)};
    case FcClass::FC2: return {single, static_cast<double>(d)};
    case FcClass::FC3: return {single, static_cast<double>(d) * d};
    default:
      throw Unmitigable("fault combination " + std::string(to_string(cls)) + " cannot be mitigated");
  }
}

}  // namespace

double max_mitigated_ber(FcClass cls, BerSite site, int d, const FloatFormat& fmt) {
  const BerTerms t = ber_terms(cls, site, d, fmt);
  return t.single * t.tolerated;
}

double round_sig(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  const int exponent = static_cast<int>(std::floor(std::log10(std::fabs(value))));
  const double scale = std::pow(10.0, digits - 1 - exponent);
  // The relative nudge keeps decimal halves such as 3.815e-5 from rounding down.
  const double scaled = std::fabs(value) * scale * (1.0 + 1e-12);
  return std::copysign(std::floor(scaled + 0.5) / scale, value);
}

double quoted_max_mitigated_ber(FcClass cls, BerSite site, int d, const FloatFormat& fmt) {
  const BerTerms t = ber_terms(cls, site, d, fmt);
  return round_sig(round_sig(t.single, 3) * t.tolerated, 3);
}

}  // namespace fltlab
