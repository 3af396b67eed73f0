#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "adadim/bytes.hpp"
#include "adadim/error.hpp"
#include "adadim/tensor.hpp"

// Minimal NPY v1.0 support: little-endian float32, C order, exactly two dimensions.
namespace adadim::npy {

inline constexpr std::string_view kMagic{"\x93NUMPY", 6};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Returns the raw text of the value following 'key': in a Python dict literal.
inline std::string_view dict_value(std::string_view header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string_view::npos) {
    throw Error(Errc::BadHeader, "npy header missing key " + quoted);
  }
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw Error(Errc::BadHeader, "npy header malformed near " + quoted);
  auto rest = trim(header.substr(pos + 1));
  std::size_t end = 0;
  if (!rest.empty() && rest.front() == '(') {
    end = rest.find(')');
    if (end == std::string_view::npos) throw Error(Errc::BadHeader, "npy shape tuple not closed");
    return rest.substr(0, end + 1);
  }
  if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
    end = rest.find(rest.front(), 1);
    if (end == std::string_view::npos) throw Error(Errc::BadHeader, "npy string value not closed");
    return rest.substr(0, end + 1);
  }
  end = rest.find_first_of(",}");
  return trim(rest.substr(0, end));
}

inline std::vector<std::size_t> parse_shape(std::string_view tuple) {
  std::vector<std::size_t> dims;
  std::string_view body = tuple.substr(1, tuple.size() - 2);
  while (true) {
    body = trim(body);
    if (body.empty()) break;
    auto comma = body.find(',');
    auto token = trim(body.substr(0, comma));
    if (!token.empty()) {
      std::size_t value = 0;
      for (char ch : token) {
        if (ch < '0' || ch > '9') throw Error(Errc::BadHeader, "npy shape entry is not an integer");
        value = value * 10 + static_cast<std::size_t>(ch - '0');
      }
      dims.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return dims;
}

}  // namespace detail

inline std::string serialize(const Tensor2D& tensor) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(tensor.rows()) +
                     ", " + std::to_string(tensor.cols()) + "), }";
  // Preamble + header padded with spaces and a newline to a multiple of 64 bytes.
  const std::size_t unpadded = kMagic.size() + 2 + 2 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::string out;
  out.reserve(kMagic.size() + 4 + dict.size() + tensor.size() * 4);
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  adadim::detail::put_le(out, static_cast<std::uint16_t>(dict.size()));
  out.append(dict);
  for (float v : tensor.values()) adadim::detail::put_le(out, v);
  return out;
}

inline Tensor2D parse(std::string_view bytes) {
  adadim::detail::ByteReader in(bytes);
  if (in.remaining() < kMagic.size() || in.take(kMagic.size(), "npy magic") != kMagic) {
    throw Error(Errc::BadMagic, "not an NPY file (bad magic)");
  }
  const auto major = in.get_le<std::uint8_t>("npy version");
  const auto minor = in.get_le<std::uint8_t>("npy version");
  if (major != 1 || minor != 0) {
    throw Error(Errc::BadVersion, "unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor) +
                                      " (only 1.0)");
  }
  const auto header_len = in.get_le<std::uint16_t>("npy header length");
  const std::string_view header = in.take(header_len, "npy header");

  const auto descr = detail::dict_value(header, "descr");
  if (descr != "'<f4'") {
    throw Error(Errc::UnsupportedDtype, "unsupported NPY dtype " + std::string(descr) + " (only '<f4')");
  }
  const auto fortran = detail::dict_value(header, "fortran_order");
  if (fortran == "True") throw Error(Errc::FortranOrder, "Fortran-ordered NPY arrays are not supported");
  if (fortran != "False") throw Error(Errc::BadHeader, "npy fortran_order must be True or False");

  const auto shape_text = detail::dict_value(header, "shape");
  if (shape_text.empty() || shape_text.front() != '(') throw Error(Errc::BadHeader, "npy shape is not a tuple");
  const auto dims = detail::parse_shape(shape_text);
  if (dims.size() != 2) {
    throw Error(Errc::WrongNdim, "NPY array has " + std::to_string(dims.size()) + " dimensions, expected 2");
  }

  const std::size_t count = dims[0] * dims[1];
  if (in.remaining() < count * 4) {
    throw Error(Errc::Truncated, "truncated NPY payload: expected " + std::to_string(count * 4) + " bytes, got " +
                                     std::to_string(in.remaining()));
  }
  std::vector<float> data(count);
  for (auto& v : data) v = in.get_le<float>("npy payload");
  Tensor2D tensor(dims[0], dims[1], std::move(data));
  if (!tensor.all_finite()) throw Error(Errc::NonFinite, "NPY payload contains NaN or Inf");
  return tensor;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::Io, "cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw Error(Errc::Io, "failed writing " + path.string());
}

inline Tensor2D read(const std::filesystem::path& path) { return parse(read_file(path)); }

inline void write(const std::filesystem::path& path, const Tensor2D& tensor) {
  write_file(path, serialize(tensor));
}

}  // namespace adadim::npy
