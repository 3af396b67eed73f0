#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "adadim/artifact.hpp"
#include "adadim/error.hpp"
#include "adadim/quant.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

struct TimingSummary {
  double min_ns_per_element = 0.0;
  double median_ns_per_element = 0.0;
  double max_ns_per_element = 0.0;
};

struct BenchReport {
  std::string layout;
  std::size_t oc = 0;
  std::size_t ic = 0;
  int bits = 0;
  std::string group_size;
  std::size_t repetitions = 0;
  TimingSummary native;
  TimingSummary transposed;
  double checksum = 0.0;
};

inline double checksum_of(const Tensor2D& t) {
  double s = 0.0;
  for (float v : t.values()) s += v;
  return s;
}

// Contrast path: params held in the transposed layout and fetched per element
// with a stride, as a per-OC kernel that transposes its scales would.
inline Tensor2D transposed_param_dequant(const PackedArtifact& a, const std::vector<float>& scales_t,
                                         const std::vector<std::uint8_t>& zeros_t) {
  const auto& h = a.header;
  const std::size_t oc = h.oc;
  const std::size_t ic = h.ic;
  Tensor2D out(oc, ic);
  CodeReader reader(a.payload, h.bits);
  if (h.dim == QuantDim::PerIC) {
    const std::size_t g = h.group().extent(oc);
    const std::size_t group_rows = (oc + g - 1) / g;
    for (std::size_t r = 0; r < oc; ++r) {
      float* dst = out.row(r).data();
      const std::size_t k = r / g;
      for (std::size_t c = 0; c < ic; ++c) {
        const std::size_t idx = c * group_rows + k;
        dst[c] = dequantize_value(reader.next(), {scales_t[idx], zeros_t[idx]});
      }
    }
  } else {
    const std::size_t g = h.group().extent(ic);
    std::vector<std::uint32_t> pos(ic);
    for (std::size_t c = 0; c < ic; ++c) pos[c] = static_cast<std::uint32_t>(c);
    for (std::size_t p = 0; p < a.column_order.size(); ++p) pos[a.column_order[p]] = static_cast<std::uint32_t>(p);
    for (std::size_t r = 0; r < oc; ++r) {
      float* dst = out.row(r).data();
      for (std::size_t c = 0; c < ic; ++c) {
        const std::size_t idx = (pos[c] / g) * oc + r;
        dst[c] = dequantize_value(reader.next(), {scales_t[idx], zeros_t[idx]});
      }
    }
  }
  return out;
}

namespace detail {

template <typename Fn>
TimingSummary time_loop(std::size_t repetitions, std::size_t elements, double& sink, Fn&& fn) {
  sink += checksum_of(fn());  // warmup
  std::vector<double> ns;
  ns.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor2D out = fn();
    const auto stop = std::chrono::steady_clock::now();
    sink += out.values()[0];
    ns.push_back(std::chrono::duration<double, std::nano>(stop - start).count() / static_cast<double>(elements));
  }
  std::sort(ns.begin(), ns.end());
  return {ns.front(), ns[ns.size() / 2], ns.back()};
}

}  // namespace detail

inline BenchReport bench_dequant(const PackedArtifact& a, std::size_t repetitions) {
  if (repetitions < 1) throw Error(Errc::InvalidArgument, "bench_dequant: repetitions must be >= 1");
  const auto& h = a.header;
  const std::size_t elements = std::size_t{h.oc} * h.ic;

  const auto shaped = QuantParams::shaped(h.dim, h.oc, h.ic, h.group());
  std::vector<float> scales_t(a.scales.size());
  std::vector<std::uint8_t> zeros_t(a.zeros.size());
  for (std::size_t i = 0; i < shaped.group_rows; ++i) {
    for (std::size_t j = 0; j < shaped.group_cols; ++j) {
      scales_t[j * shaped.group_rows + i] = a.scales[i * shaped.group_cols + j];
      zeros_t[j * shaped.group_rows + i] = a.zeros[i * shaped.group_cols + j];
    }
  }

  BenchReport report;
  report.layout = h.dim == QuantDim::PerIC ? "per_ic" : "per_oc";
  report.oc = h.oc;
  report.ic = h.ic;
  report.bits = h.bits;
  report.group_size = h.group().to_string();
  report.repetitions = repetitions;
  double sink = 0.0;
  report.native = detail::time_loop(repetitions, elements, sink, [&] { return stream_dequant(a); });
  report.transposed =
      detail::time_loop(repetitions, elements, sink, [&] { return transposed_param_dequant(a, scales_t, zeros_t); });
  report.checksum = checksum_of(stream_dequant(a));
  volatile double observed = sink;
  (void)observed;
  return report;
}

inline nlohmann::json to_json(const TimingSummary& t) {
  return {{"min_ns_per_element", t.min_ns_per_element},
          {"median_ns_per_element", t.median_ns_per_element},
          {"max_ns_per_element", t.max_ns_per_element}};
}

inline nlohmann::json to_json(const BenchReport& r) {
  return {{"layout", r.layout},
          {"oc", r.oc},
          {"ic", r.ic},
          {"bits", r.bits},
          {"group_size", r.group_size},
          {"repetitions", r.repetitions},
          {"native", to_json(r.native)},
          {"transposed", to_json(r.transposed)},
          {"checksum", r.checksum}};
}

}  // namespace adadim
