#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "adadim/bytes.hpp"
#include "adadim/error.hpp"
#include "adadim/npy.hpp"
#include "adadim/pack.hpp"
#include "adadim/quant.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

inline constexpr std::string_view kArtifactMagic{"ADIM", 4};
// Version 1 is the base layout; version 2 appends a u32[ic] column order for
// per-OC layers whose groups follow a reordered column sequence.
inline constexpr std::uint16_t kArtifactVersion = 1;
inline constexpr std::uint16_t kArtifactVersionOrdered = 2;

struct ArtifactHeader {
  std::uint16_t version = kArtifactVersion;
  std::uint8_t bits = 0;
  QuantDim dim = QuantDim::PerOC;
  std::uint32_t oc = 0;
  std::uint32_t ic = 0;
  std::uint32_t group_size = 0;  // 0 = FULL

  GroupSize group() const { return GroupSize::from_raw(group_size); }
};

struct PackedArtifact {
  ArtifactHeader header;
  std::vector<float> scales;
  std::vector<std::uint8_t> zeros;
  std::vector<std::uint8_t> payload;
  std::vector<std::uint32_t> column_order;

  std::size_t param_count() const {
    return QuantParams::shaped(header.dim, header.oc, header.ic, header.group()).count();
  }
};

inline PackedArtifact pack_layer(const QuantizedLayer& q) {
  q.validate();
  PackedArtifact a;
  a.header.version = q.column_order.empty() ? kArtifactVersion : kArtifactVersionOrdered;
  a.header.bits = static_cast<std::uint8_t>(q.config.bits);
  a.header.dim = q.config.dim;
  a.header.oc = static_cast<std::uint32_t>(q.oc);
  a.header.ic = static_cast<std::uint32_t>(q.ic);
  a.header.group_size = static_cast<std::uint32_t>(q.config.group_size.raw());
  a.scales = q.params.scales;
  a.zeros = q.params.zeros;
  a.payload = pack_codes(q.codes, q.config.bits);
  a.column_order = q.column_order;
  return a;
}

inline QuantizedLayer unpack_layer(const PackedArtifact& a) {
  QuantizedLayer q;
  q.oc = a.header.oc;
  q.ic = a.header.ic;
  q.config = QuantConfig{a.header.bits, a.header.group(), a.header.dim};
  q.params = QuantParams::shaped(q.config.dim, q.oc, q.ic, q.config.group_size);
  q.params.scales = a.scales;
  q.params.zeros = a.zeros;
  q.codes = unpack_codes(a.payload, a.header.bits, q.oc * q.ic);
  q.column_order = a.column_order;
  q.validate();
  return q;
}

inline std::string serialize_artifact(const PackedArtifact& a) {
  std::string out;
  out.append(kArtifactMagic);
  detail::put_le(out, a.header.version);
  detail::put_le(out, a.header.bits);
  detail::put_le(out, static_cast<std::uint8_t>(a.header.dim));
  detail::put_le(out, a.header.oc);
  detail::put_le(out, a.header.ic);
  detail::put_le(out, a.header.group_size);
  for (float s : a.scales) detail::put_le(out, s);
  out.append(reinterpret_cast<const char*>(a.zeros.data()), a.zeros.size());
  out.append(reinterpret_cast<const char*>(a.payload.data()), a.payload.size());
  if (a.header.version == kArtifactVersionOrdered) {
    for (auto c : a.column_order) detail::put_le(out, c);
  }
  return out;
}

inline PackedArtifact parse_artifact(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.remaining() < kArtifactMagic.size() || in.take(kArtifactMagic.size(), "magic") != kArtifactMagic) {
    throw Error(Errc::BadMagic, "not a packed artifact (bad magic)");
  }
  PackedArtifact a;
  auto& h = a.header;
  h.version = in.get_le<std::uint16_t>("header");
  if (h.version != kArtifactVersion && h.version != kArtifactVersionOrdered) {
    throw Error(Errc::BadVersion, "unsupported artifact version " + std::to_string(h.version));
  }
  h.bits = in.get_le<std::uint8_t>("header");
  const auto dim = in.get_le<std::uint8_t>("header");
  h.oc = in.get_le<std::uint32_t>("header");
  h.ic = in.get_le<std::uint32_t>("header");
  h.group_size = in.get_le<std::uint32_t>("header");
  if (h.bits != 2 && h.bits != 3 && h.bits != 4 && h.bits != 8) {
    throw Error(Errc::BadHeader, "artifact bits " + std::to_string(h.bits) + " not in {2,3,4,8}");
  }
  if (dim > 1) throw Error(Errc::BadHeader, "artifact dim " + std::to_string(dim) + " is not 0 or 1");
  h.dim = static_cast<QuantDim>(dim);
  if (h.oc == 0 || h.ic == 0) throw Error(Errc::BadHeader, "artifact has an empty shape");

  const std::size_t params = a.param_count();
  const std::size_t payload = packed_size(std::size_t{h.oc} * h.ic, h.bits);
  const std::size_t order = h.version == kArtifactVersionOrdered ? std::size_t{h.ic} * 4 : 0;
  const std::size_t expected = in.offset() + params * 5 + payload + order;
  if (bytes.size() != expected) {
    throw Error(bytes.size() < expected ? Errc::Truncated : Errc::BadHeader,
                "artifact size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  a.scales.resize(params);
  for (auto& s : a.scales) s = in.get_le<float>("scales");
  auto zeros = in.take(params, "zeros");
  a.zeros.assign(zeros.begin(), zeros.end());
  auto body = in.take(payload, "payload");
  a.payload.assign(body.begin(), body.end());
  if (order) {
    a.column_order.resize(h.ic);
    for (auto& c : a.column_order) c = in.get_le<std::uint32_t>("column order");
  }
  return a;
}

inline void write_artifact(const std::filesystem::path& path, const QuantizedLayer& q) {
  npy::write_file(path, serialize_artifact(pack_layer(q)));
}

inline PackedArtifact read_packed_artifact(const std::filesystem::path& path) {
  return parse_artifact(npy::read_file(path));
}

inline QuantizedLayer read_artifact(const std::filesystem::path& path) {
  return unpack_layer(read_packed_artifact(path));
}

// Addresses (element indices) touched in each stream, in access order.
struct AccessTrace {
  std::vector<std::size_t> scales;
  std::vector<std::size_t> zeros;
  std::vector<std::size_t> payload;
};

// Dequantize straight from the packed payload. PerIC reads each group row of
// params once, in order, alongside the row-major code stream, so all three
// streams advance monotonically.
inline Tensor2D stream_dequant(const PackedArtifact& a, AccessTrace* trace = nullptr) {
  const auto& h = a.header;
  const std::size_t oc = h.oc;
  const std::size_t ic = h.ic;
  if (a.scales.size() != a.param_count() || a.zeros.size() != a.param_count() ||
      a.payload.size() < packed_size(oc * ic, h.bits)) {
    throw Error(Errc::BadHeader, "artifact arrays do not match header");
  }
  Tensor2D out(oc, ic);
  CodeReader reader(a.payload, h.bits);
  auto read_code = [&]() {
    const auto code = reader.next();
    if (trace) trace->payload.push_back(reader.last_byte());
    return code;
  };

  if (h.dim == QuantDim::PerIC) {
    const std::size_t g = h.group().extent(oc);
    std::vector<GroupParams> row_params(ic);
    for (std::size_t r = 0; r < oc; ++r) {
      if (r % g == 0) {
        const std::size_t base = (r / g) * ic;
        for (std::size_t c = 0; c < ic; ++c) {
          row_params[c] = {a.scales[base + c], a.zeros[base + c]};
          if (trace) {
            trace->scales.push_back(base + c);
            trace->zeros.push_back(base + c);
          }
        }
      }
      float* dst = out.row(r).data();
      for (std::size_t c = 0; c < ic; ++c) dst[c] = dequantize_value(read_code(), row_params[c]);
    }
    return out;
  }

  const std::size_t g = h.group().extent(ic);
  const std::size_t group_cols = (ic + g - 1) / g;
  std::vector<std::uint32_t> pos(ic);
  for (std::size_t c = 0; c < ic; ++c) pos[c] = static_cast<std::uint32_t>(c);
  for (std::size_t p = 0; p < a.column_order.size(); ++p) pos[a.column_order[p]] = static_cast<std::uint32_t>(p);
  for (std::size_t r = 0; r < oc; ++r) {
    float* dst = out.row(r).data();
    for (std::size_t c = 0; c < ic; ++c) {
      const std::size_t idx = r * group_cols + pos[c] / g;
      if (trace) {
        trace->scales.push_back(idx);
        trace->zeros.push_back(idx);
      }
      dst[c] = dequantize_value(read_code(), {a.scales[idx], a.zeros[idx]});
    }
  }
  return out;
}

}  // namespace adadim
