#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fltlab/systolic.hpp"

namespace fltlab {

/// Images as rows of pixel intensities in [0, 1] with one class label each.
struct Dataset {
  Matrix images;
  std::vector<int> labels;

  Index size() const { return images.rows(); }

  /// Rows `indices` of this dataset, in that order.
  Dataset subset(const std::vector<Index>& indices) const;
  /// The first min(n, size()) rows.
  Dataset head(Index n) const;
};

/// Malformed file contents. The message names the path and byte offset.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an IDX image file (magic 0x00000803) into an n x (rows * cols)
/// matrix of bytes divided by 255.
Matrix load_idx_images(const std::filesystem::path& path);

/// Reads an IDX label file (magic 0x00000801).
std::vector<int> load_idx_labels(const std::filesystem::path& path);

/// Loads an image/label pair and checks that the counts agree.
Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Loads `<dir>/<split>-images-idx3-ubyte` and `<dir>/<split>-labels-idx1-ubyte`.
Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace fltlab
