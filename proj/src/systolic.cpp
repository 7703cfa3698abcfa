#include "fltlab/systolic.hpp"

#include <bit>
#include <string>

namespace fltlab {

namespace {

struct RoundF32 {
  double operator()(double v) const { return static_cast<float>(v); }
};

struct RoundBF16 {
  double operator()(double v) const {
    std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if ((u & 0x7F800000u) == 0x7F800000u) return static_cast<float>(v);  // inf and NaN pass through
    u += 0x7FFFu + ((u >> 16) & 1u);
    return std::bit_cast<float>(u & 0xFFFF0000u);
  }
};

struct RoundAny {
  const FloatFormat* fmt;
  double operator()(double v) const { return round_to_format(v, *fmt); }
};

template <typename Round, bool Observed>
void tile_kernel(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w, const FaultSite* fault,
                 double bias, const FloatFormat& fmt, Eigen::Ref<Matrix> out, Round round,
                 const MacObserver* observer) {
  const Index d = a.rows();
  const Index fx = fault ? fault->pe_row : -1;
  const Index fy = fault ? fault->pe_col : -1;
  const FaultKind kind = fault ? fault->kind : FaultKind::RightLink;

  // The faulty weight register holds the same corrupted value for every row of a.
  double faulty_weight = 0.0;
  if (fault && kind == FaultKind::WeightRegister) faulty_weight = apply_fault(w(fx, fy), fmt, fault->bit);

  for (Index i = 0; i < d; ++i) {
    double* acc = &out(i, 0);
    for (Index j = 0; j < d; ++j) acc[j] = bias;

    for (Index k = 0; k < d; ++k) {
      const double input = a(i, k);
      const double* wrow = w.data() + k * w.outerStride();

      if (k != fx) {
        for (Index j = 0; j < d; ++j) {
          const double in_sum = acc[j];
          acc[j] = round(in_sum + round(input * wrow[j]));
          if constexpr (Observed) (*observer)({i, j, k, input, wrow[j], in_sum, acc[j]});
        }
        continue;
      }

      switch (kind) {
        case FaultKind::RightLink: {
          const double faulty_input = apply_fault(input, fmt, fault->bit);
          for (Index j = 0; j < d; ++j) {
            const double in = j > fy ? faulty_input : input;
            const double in_sum = acc[j];
            acc[j] = round(in_sum + round(in * wrow[j]));
            if constexpr (Observed) (*observer)({i, j, k, in, wrow[j], in_sum, acc[j]});
          }
          break;
        }
        case FaultKind::DownLink: {
          acc[fy] = apply_fault(acc[fy], fmt, fault->bit);
          for (Index j = 0; j < d; ++j) {
            const double in_sum = acc[j];
            acc[j] = round(in_sum + round(input * wrow[j]));
            if constexpr (Observed) (*observer)({i, j, k, input, wrow[j], in_sum, acc[j]});
          }
          break;
        }
        case FaultKind::WeightRegister: {
          for (Index j = 0; j < d; ++j) {
            const double wt = j == fy ? faulty_weight : wrow[j];
            const double in_sum = acc[j];
            acc[j] = round(in_sum + round(input * wt));
            if constexpr (Observed) (*observer)({i, j, k, input, wt, in_sum, acc[j]});
          }
          break;
        }
      }
    }
  }
}

template <typename Round>
void dispatch_observed(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w, const FaultSite* fault,
                       double bias, const FloatFormat& fmt, Eigen::Ref<Matrix> out, Round round,
                       const MacObserver* observer) {
  if (observer && *observer) {
    tile_kernel<Round, true>(a, w, fault, bias, fmt, out, round, observer);
  } else {
    tile_kernel<Round, false>(a, w, fault, bias, fmt, out, round, nullptr);
  }
}

}  // namespace

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::RightLink: return "right_link";
    case FaultKind::DownLink: return "down_link";
    case FaultKind::WeightRegister: return "weight_register";
  }
  return "?";
}

FaultKind parse_fault_kind(std::string_view text) {
  if (text == "right_link" || text == "rl") return FaultKind::RightLink;
  if (text == "down_link" || text == "dl") return FaultKind::DownLink;
  if (text == "weight_register" || text == "wr") return FaultKind::WeightRegister;
  throw std::invalid_argument("unknown fault kind '" + std::string(text) +
                              "' (expected right_link, down_link or weight_register)");
}

void validate(const FaultSite& site, int tile_dim, const FloatFormat& fmt) {
  if (site.pe_row < 0 || site.pe_row >= tile_dim || site.pe_col < 0 || site.pe_col >= tile_dim) {
    throw std::domain_error("fault PE (" + std::to_string(site.pe_row) + ", " + std::to_string(site.pe_col) +
                            ") outside a " + std::to_string(tile_dim) + "x" + std::to_string(tile_dim) + " array");
  }
  if (site.bit.bit_position < 0 || site.bit.bit_position >= fmt.total_bits) {
    throw std::domain_error("fault bit " + std::to_string(site.bit.bit_position) + " outside " +
                            std::string(to_string(fmt.name)));
  }
  if (site.bit.stuck_value != 0 && site.bit.stuck_value != 1) {
    throw std::domain_error("stuck value must be 0 or 1");
  }
}

TileGrid::TileGrid(Matrix padded, int tile_dim, Index original_rows, Index original_cols)
    : padded_(std::move(padded)), tile_dim_(tile_dim), original_rows_(original_rows), original_cols_(original_cols) {
  if (tile_dim_ < 1) throw std::domain_error("TileGrid: tile dimension must be >= 1");
  if (padded_.rows() % tile_dim_ != 0 || padded_.cols() % tile_dim_ != 0) {
    throw std::domain_error("TileGrid: padded shape is not a multiple of the tile dimension");
  }
}

Matrix untile(const TileGrid& grid) {
  return grid.padded().topLeftCorner(grid.original_rows(), grid.original_cols());
}

void systolic_tile_mm_into(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w,
                           const std::optional<FaultSite>& fault, double bias, const FloatFormat& fmt,
                           Eigen::Ref<Matrix> out, const MacObserver* observer) {
  const Index d = a.rows();
  if (a.cols() != d || w.rows() != d || w.cols() != d || out.rows() != d || out.cols() != d) {
    throw std::domain_error("systolic_tile_mm: tiles must all be d x d");
  }
  const FaultSite* site = fault ? &*fault : nullptr;
  if (site) validate(*site, static_cast<int>(d), fmt);

  switch (fmt.name) {
    case FormatName::f32: dispatch_observed(a, w, site, bias, fmt, out, RoundF32{}, observer); break;
    case FormatName::bf16: dispatch_observed(a, w, site, bias, fmt, out, RoundBF16{}, observer); break;
    case FormatName::f16: dispatch_observed(a, w, site, bias, fmt, out, RoundAny{&fmt}, observer); break;
  }
}

Matrix systolic_tile_mm(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w,
                        const std::optional<FaultSite>& fault, double bias, const FloatFormat& fmt) {
  Matrix out(a.rows(), a.rows());
  systolic_tile_mm_into(a, w, fault, bias, fmt, out);
  return out;
}

Matrix tiled_mm(const Matrix& a, const Matrix& w, int tile_dim, const std::optional<FaultSite>& fault, double bias,
                const FloatFormat& fmt) {
  if (a.cols() != w.rows()) {
    throw std::domain_error("tiled_mm: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                            std::to_string(w.rows()) + ")");
  }
  if (fault) validate(*fault, tile_dim, fmt);
  const TileGrid at = tile(a, tile_dim);
  const TileGrid wt = tile(w, tile_dim);
  TileGrid ct = tile(Matrix::Zero(a.rows(), w.cols()), tile_dim);

  for_each_partial_tile(at, wt, fault, bias, fmt, [&](Index ti, Index z, Index tj, const Matrix& partial) {
    auto acc = ct.tile(ti, tj);
    if (z == 0) {
      acc = partial;
    } else {
      for (Index i = 0; i < tile_dim; ++i)
        for (Index j = 0; j < tile_dim; ++j) acc(i, j) = round_to_format(acc(i, j) + partial(i, j), fmt);
    }
  });
  return untile(ct);
}

Matrix reference_mm(const Matrix& a, const Matrix& w, const FloatFormat& fmt) {
  if (a.cols() != w.rows()) {
    throw std::domain_error("reference_mm: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                            std::to_string(w.rows()) + ")");
  }
  Matrix out(a.rows(), w.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      long double sum = 0.0L;
      for (Index k = 0; k < a.cols(); ++k) sum += static_cast<long double>(a(i, k)) * w(k, j);
      out(i, j) = round_to_format(static_cast<double>(sum), fmt);
    }
  }
  return out;
}

}  // namespace fltlab
