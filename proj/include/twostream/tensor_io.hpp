#pragma once

#include <filesystem>
#include <iosfwd>

#include "twostream/tensor.hpp"

namespace twostream {

enum class StoredPrecision { F32, F64 };

// TSR1 layout: ASCII header "TSR1 <ndim> <d1> ... <dn> <f32|f64>\n" followed by
// the row-major payload as little-endian IEEE-754 values.

void write_tsr(std::ostream& os, const Tensor& t, StoredPrecision precision = StoredPrecision::F64);
Tensor read_tsr(std::istream& is);

void save_tsr(const std::filesystem::path& path, const Tensor& t,
              StoredPrecision precision = StoredPrecision::F64);
Tensor load_tsr(const std::filesystem::path& path);

}  // namespace twostream
