/**
 * @brief Self-describing binary array files.
 *
 * Layout: one JSON header line, then the raw C-order little-endian payload.
 *
 *   {"dtype": "f64", "shape": [64, 64, 3, 3], "order": "C", "byte_order": "LE"}\n
 *   <product(shape) * sizeof(dtype) bytes>
 *
 * The header text is produced byte-for-byte in the form above (key order,
 * ", " and ": " separators). Readers accept any JSON object with exactly
 * these four keys.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "micromech/errors.hpp"
#include "micromech/grid.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

enum class DType { F64, U8 };

inline const char* to_string(DType d) { return d == DType::F64 ? "f64" : "u8"; }
inline std::size_t dtype_size(DType d) { return d == DType::F64 ? 8 : 1; }

struct ArrayHeader {
  DType dtype = DType::F64;
  std::vector<std::size_t> shape;

  std::size_t count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t payload_bytes() const { return count() * dtype_size(dtype); }
  friend bool operator==(const ArrayHeader&, const ArrayHeader&) = default;
};

/// Numeric payload of an array file; exactly one of f64 / u8 is filled.
struct ArrayData {
  ArrayHeader header;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;
};

inline std::string format_header(const ArrayHeader& h) {
  std::string s = "{\"dtype\": \"";
  s += to_string(h.dtype);
  s += "\", \"shape\": [";
  for (std::size_t i = 0; i < h.shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(h.shape[i]);
  }
  s += "], \"order\": \"C\", \"byte_order\": \"LE\"}\n";
  return s;
}

inline ArrayHeader parse_header(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("array header is not JSON: ") + e.what());
  }
  if (!j.is_object() || j.size() != 4 || !j.contains("dtype") || !j.contains("shape") ||
      !j.contains("order") || !j.contains("byte_order"))
    throw FormatError("array header must have exactly dtype, shape, order, byte_order");
  if (j["order"] != "C") throw FormatError("array header: order must be \"C\"");
  if (j["byte_order"] != "LE") throw FormatError("array header: byte_order must be \"LE\"");
  ArrayHeader h;
  if (j["dtype"] == "f64")
    h.dtype = DType::F64;
  else if (j["dtype"] == "u8")
    h.dtype = DType::U8;
  else
    throw FormatError("array header: unsupported dtype");
  if (!j["shape"].is_array()) throw FormatError("array header: shape must be an array");
  for (const auto& d : j["shape"]) {
    if (!d.is_number_unsigned()) throw FormatError("array header: shape entries must be unsigned integers");
    h.shape.push_back(d.get<std::size_t>());
  }
  return h;
}

namespace detail {

inline void store_le(double v, char* out) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int b = 0; b < 8; ++b) out[b] = static_cast<char>((u >> (8 * b)) & 0xff);
}

inline double load_le(const char* in) {
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[b])) << (8 * b);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline std::string encode_array(std::span<const double> data, std::vector<std::size_t> shape) {
  ArrayHeader h{DType::F64, std::move(shape)};
  if (h.count() != data.size()) throw std::invalid_argument("encode_array: shape does not match data");
  std::string out = format_header(h);
  const std::size_t off = out.size();
  out.resize(off + h.payload_bytes());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + off, data.data(), h.payload_bytes());
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) detail::store_le(data[i], out.data() + off + 8 * i);
  }
  return out;
}

inline std::string encode_array(std::span<const std::uint8_t> data, std::vector<std::size_t> shape) {
  ArrayHeader h{DType::U8, std::move(shape)};
  if (h.count() != data.size()) throw std::invalid_argument("encode_array: shape does not match data");
  std::string out = format_header(h);
  out.append(reinterpret_cast<const char*>(data.data()), data.size());
  return out;
}

inline ArrayData decode_array(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("array file: missing header line");
  ArrayData a;
  a.header = parse_header(bytes.substr(0, nl));
  const std::size_t off = nl + 1;
  if (bytes.size() - off != a.header.payload_bytes())
    throw FormatError("array file: payload length " + std::to_string(bytes.size() - off) +
                      " does not match header (" + std::to_string(a.header.payload_bytes()) + ")");
  if (a.header.dtype == DType::F64) {
    a.f64.resize(a.header.count());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(a.f64.data(), bytes.data() + off, a.header.payload_bytes());
    } else {
      for (std::size_t i = 0; i < a.f64.size(); ++i) a.f64[i] = detail::load_le(bytes.data() + off + 8 * i);
    }
  } else {
    a.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  }
  return a;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path);
}

inline ArrayData read_array(const std::string& path) { return decode_array(read_file_bytes(path)); }

/// Reads only the header line.
inline ArrayHeader read_array_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("array file: missing header line in " + path);
  return parse_header(line);
}

inline void write_array(const std::string& path, std::span<const double> data,
                        std::vector<std::size_t> shape) {
  write_file_bytes(path, encode_array(data, std::move(shape)));
}

inline void write_array(const std::string& path, std::span<const std::uint8_t> data,
                        std::vector<std::size_t> shape) {
  write_file_bytes(path, encode_array(data, std::move(shape)));
}

// Typed views used across the library.

inline void write_grid(const std::string& path, const Grid<std::uint8_t>& g) {
  write_array(path, g.span(), {g.rows(), g.cols()});
}

/// (t1, t2, 3, 3) row-major per pixel.
inline void write_grid(const std::string& path, const Grid<Voigt4>& g) {
  std::vector<double> flat;
  flat.reserve(g.size() * 9);
  for (const auto& m : g)
    for (const auto& row : m.m) flat.insert(flat.end(), row.begin(), row.end());
  write_array(path, flat, {g.rows(), g.cols(), 3, 3});
}

/// (t1, t2, 3).
inline void write_grid(const std::string& path, const Grid<Voigt2>& g) {
  std::vector<double> flat;
  flat.reserve(g.size() * 3);
  for (const auto& v : g) flat.insert(flat.end(), v.v.begin(), v.v.end());
  write_array(path, flat, {g.rows(), g.cols(), 3});
}

inline Grid<std::uint8_t> to_phase_grid(const ArrayData& a) {
  if (a.header.dtype != DType::U8 || a.header.shape.size() != 2)
    throw FormatError("expected a (t1, t2) u8 array");
  Grid<std::uint8_t> g(a.header.shape[0], a.header.shape[1]);
  std::copy(a.u8.begin(), a.u8.end(), g.begin());
  return g;
}

inline Grid<Voigt4> to_voigt4_grid(const ArrayData& a) {
  const auto& s = a.header.shape;
  if (a.header.dtype != DType::F64 || s.size() != 4 || s[2] != 3 || s[3] != 3)
    throw FormatError("expected a (t1, t2, 3, 3) f64 array");
  Grid<Voigt4> g(s[0], s[1]);
  for (std::size_t k = 0; k < g.size(); ++k)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) g[k](i, j) = a.f64[9 * k + 3 * i + j];
  return g;
}

inline Grid<Voigt2> to_voigt2_grid(const ArrayData& a) {
  const auto& s = a.header.shape;
  if (a.header.dtype != DType::F64 || s.size() != 3 || s[2] != 3)
    throw FormatError("expected a (t1, t2, 3) f64 array");
  Grid<Voigt2> g(s[0], s[1]);
  for (std::size_t k = 0; k < g.size(); ++k)
    for (std::size_t i = 0; i < 3; ++i) g[k][i] = a.f64[3 * k + i];
  return g;
}

}  // namespace micromech
