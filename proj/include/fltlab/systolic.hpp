#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "fltlab/floatbits.hpp"

namespace fltlab {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Simulator matrices hold doubles whose values are representable in the
/// active FloatFormat.
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

enum class FaultKind { RightLink, DownLink, WeightRegister };

std::string_view to_string(FaultKind kind);
FaultKind parse_fault_kind(std::string_view text);

/// One stuck bit at processing element (pe_row, pe_col) of a d x d array.
/// pe_row indexes the inner (k) dimension, pe_col the output column.
struct FaultSite {
  FaultKind kind;
  int pe_row;
  int pe_col;
  BitFault bit;
};

/// Throws std::domain_error if the site does not fit a d x d array of `fmt`.
void validate(const FaultSite& site, int tile_dim, const FloatFormat& fmt);

/// A matrix zero-padded up to a multiple of tile_dim in both directions.
class TileGrid {
 public:
  TileGrid(Matrix padded, int tile_dim, Index original_rows, Index original_cols);

  int tile_dim() const { return tile_dim_; }
  Index grid_rows() const { return padded_.rows() / tile_dim_; }
  Index grid_cols() const { return padded_.cols() / tile_dim_; }
  Index original_rows() const { return original_rows_; }
  Index original_cols() const { return original_cols_; }

  auto tile(Index i, Index j) { return padded_.block(i * tile_dim_, j * tile_dim_, tile_dim_, tile_dim_); }
  auto tile(Index i, Index j) const {
    return padded_.block(i * tile_dim_, j * tile_dim_, tile_dim_, tile_dim_);
  }

  const Matrix& padded() const { return padded_; }
  Matrix& padded() { return padded_; }

 private:
  Matrix padded_;
  int tile_dim_;
  Index original_rows_;
  Index original_cols_;
};

template <typename Derived>
TileGrid tile(const Eigen::MatrixBase<Derived>& m, int tile_dim) {
  if (tile_dim < 1) throw std::domain_error("tile: tile dimension must be >= 1");
  const Index r = (m.rows() + tile_dim - 1) / tile_dim;
  const Index k = (m.cols() + tile_dim - 1) / tile_dim;
  Matrix padded = Matrix::Zero(r * tile_dim, k * tile_dim);
  padded.topLeftCorner(m.rows(), m.cols()) = m;
  return TileGrid(std::move(padded), tile_dim, m.rows(), m.cols());
}

Matrix untile(const TileGrid& grid);

template <typename Derived>
Matrix round_to_format(const Eigen::MatrixBase<Derived>& m, const FloatFormat& fmt) {
  return m.unaryExpr([&fmt](double v) { return round_to_format(v, fmt); });
}

/// Values seen by one multiply-accumulate step of an instrumented pass.
struct MacStep {
  Index i, j, k;
  double input;        // activation after any right-link fault
  double weight;       // weight after any weight-register fault
  double partial_in;   // partial sum after any down-link fault
  double partial_out;  // rounded partial_in + input * weight
};
using MacObserver = std::function<void(const MacStep&)>;

/// One pass of a d x d weight-stationary array. For every output cell the
/// accumulator starts at `bias` and visits k = 0..d-1 in order; every product
/// and every sum is rounded to `fmt`. A right-link fault at (x, y) corrupts
/// the activation when k == x and j > y, a down-link fault corrupts the
/// incoming partial sum when k == x and j == y, and a weight-register fault
/// corrupts the weight at k == x, j == y.
void systolic_tile_mm_into(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w,
                           const std::optional<FaultSite>& fault, double bias, const FloatFormat& fmt,
                           Eigen::Ref<Matrix> out, const MacObserver* observer = nullptr);

Matrix systolic_tile_mm(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& w,
                        const std::optional<FaultSite>& fault, double bias, const FloatFormat& fmt);

/// Runs every tile pair of a x w through the array and hands each partial
/// output tile to `consume(row_tile, inner_tile, col_tile, partial)`. Inner
/// tiles are visited in increasing order for a given output tile.
template <typename Consume>
void for_each_partial_tile(const TileGrid& a, const TileGrid& w, const std::optional<FaultSite>& fault,
                           double bias, const FloatFormat& fmt, Consume&& consume) {
  if (a.tile_dim() != w.tile_dim() || a.grid_cols() != w.grid_rows()) {
    throw std::domain_error("for_each_partial_tile: tile grids do not chain");
  }
  const int d = a.tile_dim();
  Matrix partial(d, d);
  for (Index ti = 0; ti < a.grid_rows(); ++ti) {
    for (Index tj = 0; tj < w.grid_cols(); ++tj) {
      for (Index z = 0; z < a.grid_cols(); ++z) {
        systolic_tile_mm_into(a.tile(ti, z), w.tile(z, tj), fault, bias, fmt, partial);
        consume(ti, z, tj, std::as_const(partial));
      }
    }
  }
}

/// Tiled product on a d x d array. The same fault is present in every tile
/// pass; partial output tiles are accumulated in `fmt` over the inner tiles.
Matrix tiled_mm(const Matrix& a, const Matrix& w, int tile_dim, const std::optional<FaultSite>& fault,
                double bias, const FloatFormat& fmt);

/// Plain triple-loop product in long double, rounded to `fmt` at the end.
Matrix reference_mm(const Matrix& a, const Matrix& w, const FloatFormat& fmt);

}  // namespace fltlab
