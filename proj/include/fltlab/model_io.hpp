#pragma once

#include <filesystem>

#include "fltlab/idx.hpp"
#include "fltlab/model.hpp"

namespace fltlab {

/// Writes the FLTLAB01 layout: the 8 ASCII bytes "FLTLAB01", the layer count
/// and each layer's (rows, cols) as u64 little-endian, then per layer the
/// row-major weights followed by the biases as f32 little-endian. Parameters
/// are rounded to f32 on the way out.
void save_model(const std::filesystem::path& path, const FcnModel& model);

/// Reads a FLTLAB01 file. Throws ParseError on a bad magic, an inconsistent
/// header or a byte count that does not match the header.
FcnModel load_model(const std::filesystem::path& path);

}  // namespace fltlab
