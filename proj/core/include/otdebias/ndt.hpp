#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "otdebias/tensor.hpp"

namespace otdebias {

// NDT1 raw tensor files:
//   "NDT1" | u32 little-endian header length | UTF-8 JSON {"dtype":"f64","shape":[...]} |
//   little-endian IEEE-754 binary64 payload in row-major order.

std::vector<std::uint8_t> encode_ndt(const Tensor& tensor);
Tensor decode_ndt(const std::vector<std::uint8_t>& bytes);

void write_ndt(std::ostream& out, const Tensor& tensor);
Tensor read_ndt(std::istream& in);

void save_ndt(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_ndt(const std::filesystem::path& path);

}  // namespace otdebias
