#include "fltlab/idx.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

namespace fltlab {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::vector<unsigned char> bytes)
      : path_(path), bytes_(std::move(bytes)) {}

  std::uint32_t u32be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_++];
    return v;
  }

  const unsigned char* take(std::size_t n) {
    need(n);
    const unsigned char* p = bytes_.data() + offset_;
    offset_ += n;
    return p;
  }

  std::size_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ParseError(path_.string() + ": " + what + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - offset_ < n) {
      fail("truncated file: need " + std::to_string(n) + " more bytes, have " +
               std::to_string(bytes_.size() - offset_),
           offset_);
    }
  }

  std::filesystem::path path_;
  std::vector<unsigned char> bytes_;
  std::size_t offset_ = 0;
};

void check_magic(Reader& r, std::uint32_t expected) {
  const std::uint32_t magic = r.u32be();
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08X (expected 0x%08X)", magic, expected);
    r.fail(buf, 0);
  }
}

}  // namespace

Dataset Dataset::subset(const std::vector<Index>& indices) const {
  Dataset out{Matrix(static_cast<Index>(indices.size()), images.cols()), {}};
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.images.row(static_cast<Index>(i)) = images.row(indices[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

Dataset Dataset::head(Index n) const {
  n = std::min(n, size());
  return {images.topRows(n), std::vector<int>(labels.begin(), labels.begin() + n)};
}

Matrix load_idx_images(const std::filesystem::path& path) {
  Reader r(path, read_all(path));
  check_magic(r, 0x00000803u);
  const std::uint32_t count = r.u32be();
  const std::uint32_t rows = r.u32be();
  const std::uint32_t cols = r.u32be();
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Matrix out(count, static_cast<Index>(pixels));
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char* p = r.take(pixels);
    for (std::size_t j = 0; j < pixels; ++j) out(i, static_cast<Index>(j)) = p[j] / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  Reader r(path, read_all(path));
  check_magic(r, 0x00000801u);
  const std::uint32_t count = r.u32be();
  const unsigned char* p = r.take(count);
  return std::vector<int>(p, p + count);
}

Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Dataset ds{load_idx_images(images), load_idx_labels(labels)};
  if (static_cast<std::size_t>(ds.images.rows()) != ds.labels.size()) {
    throw ParseError("image/label count mismatch: '" + images.string() + "' has " +
                     std::to_string(ds.images.rows()) + " images, '" + labels.string() + "' has " +
                     std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split) {
  return load_dataset(dir / (split + "-images-idx3-ubyte"), dir / (split + "-labels-idx1-ubyte"));
}

}  // namespace fltlab
