#include "fltlab/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace fltlab {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'T', 'L', 'A', 'B', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, double v) {
  const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFFu));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f32(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int i = 3; i >= 0; --i) u = (u << 8) | p[i];
  return std::bit_cast<float>(u);
}

}  // namespace

void save_model(const std::filesystem::path& path, const FcnModel& model) {
  model.validate();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, model.layers.size());
  for (const Layer& layer : model.layers) {
    put_u64(out, static_cast<std::uint64_t>(layer.weight.rows()));
    put_u64(out, static_cast<std::uint64_t>(layer.weight.cols()));
  }
  for (const Layer& layer : model.layers) {
    for (Index i = 0; i < layer.weight.size(); ++i) put_f32(out, layer.weight.data()[i]);
    for (Index j = 0; j < layer.bias.size(); ++j) put_f32(out, layer.bias(j));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

FcnModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  auto fail = [&](const std::string& what) { throw ParseError(path.string() + ": " + what); };

  if (bytes.size() < 16) {
    fail("truncated header: expected at least 16 bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) fail("bad magic (expected FLTLAB01)");
  const std::uint64_t layers = get_u64(bytes.data() + 8);
  if (layers == 0 || layers > (bytes.size() - 16) / 16) {
    fail("layer count " + std::to_string(layers) + " inconsistent with file size " + std::to_string(bytes.size()));
  }

  std::uint64_t expected = 16 + 16 * layers;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t l = 0; l < layers; ++l) {
    const unsigned char* p = bytes.data() + 16 + 16 * l;
    const std::uint64_t rows = get_u64(p);
    const std::uint64_t cols = get_u64(p + 8);
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
      fail("layer " + std::to_string(l) + " has implausible shape " + std::to_string(rows) + "x" +
           std::to_string(cols));
    }
    shapes.emplace_back(rows, cols);
    expected += 4 * (rows * cols + cols);
  }
  if (bytes.size() != expected) {
    fail("size mismatch: header implies " + std::to_string(expected) + " bytes, file has " +
         std::to_string(bytes.size()));
  }

  FcnModel model;
  const unsigned char* p = bytes.data() + 16 + 16 * layers;
  for (const auto& [rows, cols] : shapes) {
    Layer layer{Matrix(static_cast<Index>(rows), static_cast<Index>(cols)),
                RowVector(static_cast<Index>(cols))};
    for (Index i = 0; i < layer.weight.size(); ++i, p += 4) layer.weight.data()[i] = get_f32(p);
    for (Index j = 0; j < layer.bias.size(); ++j, p += 4) layer.bias(j) = get_f32(p);
    model.layers.push_back(std::move(layer));
  }
  try {
    model.validate();
  } catch (const std::domain_error& e) {
    fail(e.what());
  }
  return model;
}

}  // namespace fltlab
