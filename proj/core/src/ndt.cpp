#include "otdebias/ndt.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "otdebias/error.hpp"

namespace otdebias {

namespace {

constexpr char kMagic[4] = {'N', 'D', 'T', '1'};

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_ndt(const Tensor& tensor) {
  nlohmann::json header;
  header["dtype"] = "f64";
  header["shape"] = tensor.shape();
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + 8 * tensor.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (double v : tensor.data()) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_ndt(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("not an NDT1 file");
  const auto header_len = static_cast<std::size_t>(get_le(bytes.data() + 4, 4));
  if (bytes.size() < 8 + header_len) throw DataError("NDT1 header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("NDT1 header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("dtype", "") != "f64") throw DataError("NDT1 dtype must be f64");
  if (!header.contains("shape") || !header["shape"].is_array()) throw DataError("NDT1 header lacks shape");

  Shape shape;
  for (const auto& e : header["shape"]) {
    if (!e.is_number_integer() || e.get<long long>() < 1) throw ShapeError("NDT1 extents must be positive integers");
    shape.push_back(e.get<std::size_t>());
  }
  const std::size_t n = checked_element_count(shape);
  const std::size_t payload = bytes.size() - 8 - header_len;
  if (payload != 8 * n) throw DataError("NDT1 payload length does not match shape");

  std::vector<double> data(n);
  const std::uint8_t* p = bytes.data() + 8 + header_len;
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_le(p + 8 * i, 8));
  return Tensor(std::move(shape), std::move(data));
}

void write_ndt(std::ostream& out, const Tensor& tensor) {
  const auto bytes = encode_ndt(tensor);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing NDT1 stream");
}

Tensor read_ndt(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ndt(bytes);
}

void save_ndt(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_ndt(out, tensor);
}

Tensor load_ndt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_ndt(in);
}

}  // namespace otdebias
