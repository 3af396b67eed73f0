#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "adadim/error.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

// Grouping dimension. PerOC groups run along IC inside each output row;
// PerIC groups run along OC inside each input column.
enum class QuantDim : std::uint8_t { PerOC = 0, PerIC = 1 };

inline const char* dim_name(QuantDim dim) noexcept { return dim == QuantDim::PerOC ? "oc" : "ic"; }

class GroupSize {
 public:
  constexpr GroupSize() = default;
  explicit GroupSize(std::size_t n) : value_(n) {
    if (n == 0) throw Error(Errc::InvalidArgument, "group size must be >= 1 (use GroupSize::full())");
  }

  static constexpr GroupSize full() noexcept { return GroupSize(); }

  constexpr bool is_full() const noexcept { return value_ == 0; }
  // 0 encodes FULL, matching the artifact header.
  constexpr std::size_t raw() const noexcept { return value_; }
  static GroupSize from_raw(std::size_t raw) { return raw == 0 ? full() : GroupSize(raw); }

  // Effective group length for a channel of `length` weights.
  constexpr std::size_t extent(std::size_t length) const noexcept {
    return is_full() ? length : std::min(value_, length);
  }

  std::string to_string() const { return is_full() ? "full" : std::to_string(value_); }

  friend constexpr bool operator==(GroupSize, GroupSize) = default;

 private:
  std::size_t value_ = 0;
};

struct QuantConfig {
  int bits = 3;
  GroupSize group_size{128};
  QuantDim dim = QuantDim::PerOC;

  int max_code() const noexcept { return (1 << bits) - 1; }

  void validate() const {
    if (bits != 2 && bits != 3 && bits != 4 && bits != 8) {
      throw Error(Errc::Config, "bits must be one of {2,3,4,8}, got " + std::to_string(bits));
    }
  }

  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

struct GroupParams {
  float scale = 1.0f;
  std::uint8_t zero = 0;

  friend bool operator==(const GroupParams&, const GroupParams&) = default;
};

inline int max_code_for(int bits) { return (1 << bits) - 1; }

// Asymmetric min-max fit over a range widened to contain zero, so the integer
// zero-point always lies inside [0, 2^bits - 1]. Constant groups get a scale
// that reproduces the constant exactly.
inline GroupParams fit_group_params(std::span<const float> values, int bits) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "fit_group_params: empty group");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const int maxq = max_code_for(bits);

  if (lo == hi) {
    if (lo == 0.0) return {1.0f, 0};
    if (lo > 0.0) return {static_cast<float>(lo), 0};
    return {static_cast<float>(-lo), 1};
  }

  const double range_lo = std::min(lo, 0.0);
  const double range_hi = std::max(hi, 0.0);
  float scale = static_cast<float>((range_hi - range_lo) / maxq);
  if (!(scale > 0.0f)) scale = std::numeric_limits<float>::min();
  const double zero = std::round(-range_lo / static_cast<double>(scale));
  return {scale, static_cast<std::uint8_t>(std::clamp(zero, 0.0, static_cast<double>(maxq)))};
}

// code = clamp(round_half_away(v / scale) + zero, 0, 2^bits - 1)
inline std::uint8_t quantize_value(float v, GroupParams p, int bits) noexcept {
  const double q = std::round(static_cast<double>(v) / static_cast<double>(p.scale)) + p.zero;
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, static_cast<double>(max_code_for(bits))));
}

inline float dequantize_value(std::uint8_t code, GroupParams p) noexcept {
  return static_cast<float>(static_cast<int>(code) - static_cast<int>(p.zero)) * p.scale;
}

inline std::vector<std::uint8_t> quantize_values(std::span<const float> values, GroupParams p, int bits) {
  std::vector<std::uint8_t> codes(values.size());
  std::transform(values.begin(), values.end(), codes.begin(), [&](float v) { return quantize_value(v, p, bits); });
  return codes;
}

inline std::vector<float> dequantize_values(std::span<const std::uint8_t> codes, GroupParams p) {
  std::vector<float> out(codes.size());
  std::transform(codes.begin(), codes.end(), out.begin(), [&](std::uint8_t c) { return dequantize_value(c, p); });
  return out;
}

// Per-group scales and zero-points in row-major storage.
//   PerOC: [oc, ceil(ic/g)]   index r * group_cols + k
//   PerIC: [ceil(oc/g), ic]   index k * ic + c
struct QuantParams {
  QuantDim dim = QuantDim::PerOC;
  std::size_t group_rows = 0;
  std::size_t group_cols = 0;
  std::vector<float> scales;
  std::vector<std::uint8_t> zeros;

  static QuantParams shaped(QuantDim dim, std::size_t oc, std::size_t ic, GroupSize group) {
    QuantParams p;
    p.dim = dim;
    if (dim == QuantDim::PerOC) {
      const std::size_t g = group.extent(ic);
      p.group_rows = oc;
      p.group_cols = ic == 0 ? 0 : (ic + g - 1) / g;
    } else {
      const std::size_t g = group.extent(oc);
      p.group_rows = oc == 0 ? 0 : (oc + g - 1) / g;
      p.group_cols = ic;
    }
    p.scales.assign(p.group_rows * p.group_cols, 1.0f);
    p.zeros.assign(p.group_rows * p.group_cols, 0);
    return p;
  }

  std::size_t count() const noexcept { return scales.size(); }

  GroupParams at(std::size_t index) const noexcept { return {scales[index], zeros[index]}; }

  void set(std::size_t index, GroupParams p) noexcept {
    scales[index] = p.scale;
    zeros[index] = p.zero;
  }

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

// Integer codes (one per weight, row-major) plus the params they were quantized with.
struct QuantizedLayer {
  std::size_t oc = 0;
  std::size_t ic = 0;
  QuantConfig config;
  std::vector<std::uint8_t> codes;
  QuantParams params;
  // PerOC only: column_order[p] is the original column quantized at position p,
  // and groups span consecutive positions. Empty means identity.
  std::vector<std::uint32_t> column_order;

  std::size_t group_extent() const noexcept {
    return config.group_size.extent(config.dim == QuantDim::PerOC ? ic : oc);
  }

  // Position of each original column inside the grouping order.
  std::vector<std::uint32_t> column_positions() const {
    std::vector<std::uint32_t> pos(ic);
    for (std::size_t c = 0; c < ic; ++c) pos[c] = static_cast<std::uint32_t>(c);
    for (std::size_t p = 0; p < column_order.size(); ++p) pos[column_order[p]] = static_cast<std::uint32_t>(p);
    return pos;
  }

  // Storage index of the params of weight (r, c); `pos` from column_positions().
  std::size_t param_index(std::size_t r, std::size_t c, std::span<const std::uint32_t> pos) const noexcept {
    const std::size_t g = group_extent();
    if (config.dim == QuantDim::PerOC) return r * params.group_cols + pos[c] / g;
    return (r / g) * params.group_cols + c;
  }

  void validate() const {
    config.validate();
    if (config.dim != params.dim) throw Error(Errc::InvalidArgument, "layer config dim and params dim differ");
    if (codes.size() != oc * ic) throw Error(Errc::ShapeMismatch, "layer code count does not match oc*ic");
    const auto expect = QuantParams::shaped(config.dim, oc, ic, config.group_size);
    if (params.group_rows != expect.group_rows || params.group_cols != expect.group_cols ||
        params.scales.size() != expect.scales.size() || params.zeros.size() != expect.zeros.size()) {
      throw Error(Errc::ShapeMismatch, "layer params shape does not match its config");
    }
    const int maxq = config.max_code();
    for (auto c : codes) {
      if (c > maxq) throw Error(Errc::OutOfRange, "code " + std::to_string(c) + " exceeds 2^bits-1");
    }
    for (std::size_t i = 0; i < params.count(); ++i) {
      if (!(params.scales[i] > 0.0f) || !std::isfinite(params.scales[i])) {
        throw Error(Errc::OutOfRange, "non-positive or non-finite scale at " + std::to_string(i));
      }
      if (params.zeros[i] > maxq) throw Error(Errc::OutOfRange, "zero-point exceeds 2^bits-1");
    }
    if (!column_order.empty()) {
      if (config.dim != QuantDim::PerOC) throw Error(Errc::InvalidArgument, "column order is only valid for PerOC");
      if (column_order.size() != ic) throw Error(Errc::ShapeMismatch, "column order length must equal ic");
      std::vector<bool> seen(ic, false);
      for (auto c : column_order) {
        if (c >= ic || seen[c]) throw Error(Errc::InvalidArgument, "column order is not a permutation");
        seen[c] = true;
      }
    }
  }

  friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

// Round-to-nearest group quantization along config.dim. Ragged tail groups are
// fitted on their actual extent.
inline QuantizedLayer rtn_quantize(const Tensor2D& weight, const QuantConfig& config) {
  config.validate();
  if (weight.empty()) throw Error(Errc::InvalidArgument, "rtn_quantize: empty weight " + weight.shape());
  QuantizedLayer q;
  q.oc = weight.rows();
  q.ic = weight.cols();
  q.config = config;
  q.codes.assign(q.oc * q.ic, 0);
  q.params = QuantParams::shaped(config.dim, q.oc, q.ic, config.group_size);
  const std::size_t g = q.group_extent();

  if (config.dim == QuantDim::PerOC) {
    for (std::size_t r = 0; r < q.oc; ++r) {
      auto row = weight.row(r);
      for (std::size_t k = 0; k < q.params.group_cols; ++k) {
        const std::size_t begin = k * g;
        const std::size_t len = std::min(g, q.ic - begin);
        auto group = row.subspan(begin, len);
        const auto p = fit_group_params(group, config.bits);
        q.params.set(r * q.params.group_cols + k, p);
        for (std::size_t i = 0; i < len; ++i) {
          q.codes[r * q.ic + begin + i] = quantize_value(group[i], p, config.bits);
        }
      }
    }
  } else {
    std::vector<float> column;
    for (std::size_t k = 0; k < q.params.group_rows; ++k) {
      const std::size_t begin = k * g;
      const std::size_t len = std::min(g, q.oc - begin);
      column.resize(len);
      for (std::size_t c = 0; c < q.ic; ++c) {
        for (std::size_t i = 0; i < len; ++i) column[i] = weight(begin + i, c);
        const auto p = fit_group_params(column, config.bits);
        q.params.set(k * q.ic + c, p);
        for (std::size_t i = 0; i < len; ++i) {
          q.codes[(begin + i) * q.ic + c] = quantize_value(column[i], p, config.bits);
        }
      }
    }
  }
  return q;
}

inline Tensor2D dequantize_layer(const QuantizedLayer& q) {
  Tensor2D out(q.oc, q.ic);
  const auto pos = q.column_positions();
  for (std::size_t r = 0; r < q.oc; ++r) {
    for (std::size_t c = 0; c < q.ic; ++c) {
      out(r, c) = dequantize_value(q.codes[r * q.ic + c], q.params.at(q.param_index(r, c, pos)));
    }
  }
  return out;
}

// mse(reference, forward(dequantize(q), input)) with a precomputed reference output.
inline double reconstruction_error_against(const Tensor2D& reference, const QuantizedLayer& q, const Tensor2D& input) {
  if (input.cols() != q.ic) {
    throw Error(Errc::ShapeMismatch, "reconstruction_error: input " + input.shape() + " does not match layer ic " +
                                         std::to_string(q.ic));
  }
  return mse(reference, forward(dequantize_layer(q), input));
}

inline double reconstruction_error(const Tensor2D& weight, const QuantizedLayer& q, const Tensor2D& input) {
  if (input.cols() != weight.cols()) {
    throw Error(Errc::ShapeMismatch, "reconstruction_error: input " + input.shape() + " vs weight " + weight.shape());
  }
  return reconstruction_error_against(forward(weight, input), q, input);
}

}  // namespace adadim
