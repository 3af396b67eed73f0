#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "adadim/error.hpp"
#include "adadim/gptq.hpp"
#include "adadim/npy.hpp"
#include "adadim/quant.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

// Outcome of the per-layer dimension search (or of a fixed-dimension run, in
// which case the error of the dimension not evaluated is NaN).
struct DimReport {
  std::string layer_id;
  double err_oc = std::numeric_limits<double>::quiet_NaN();
  double err_ic = std::numeric_limits<double>::quiet_NaN();
  QuantDim chosen = QuantDim::PerOC;
  std::uint32_t reference_forward_passes = 0;
  std::uint32_t quantized_forward_passes = 0;
  double wall_time_ms_oc = 0.0;
  double wall_time_ms_ic = 0.0;
  std::optional<double> err_gptq;
  bool searched = false;

  double chosen_error() const noexcept { return chosen == QuantDim::PerOC ? err_oc : err_ic; }
};

struct AdaResult {
  QuantizedLayer layer;
  DimReport report;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline void check_layer_shapes(const Tensor2D& weight, const Tensor2D& input) {
  if (input.empty()) throw Error(Errc::InvalidArgument, "calibration input is empty");
  if (weight.cols() != input.cols()) {
    throw Error(Errc::ShapeMismatch, "weight " + weight.shape() + " and calibration " + input.shape() +
                                         " disagree on input channels");
  }
}

}  // namespace detail

// Quantize with RTN along both dimensions and keep the one with the lower
// reconstruction error against a single reference output. Ties go to PerOC.
// `config.dim` is ignored.
inline AdaResult rtn_ada(const Tensor2D& weight, const Tensor2D& input, QuantConfig config,
                         std::string layer_id = {}) {
  detail::check_layer_shapes(weight, input);
  DimReport report;
  report.layer_id = std::move(layer_id);
  report.searched = true;

  const auto before_ref = forward_call_count();
  const Tensor2D reference = forward(weight, input);
  report.reference_forward_passes = static_cast<std::uint32_t>(forward_call_count() - before_ref);

  const auto before_q = forward_call_count();
  std::optional<QuantizedLayer> best;
  double best_err = std::numeric_limits<double>::infinity();
  for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
    const auto start = std::chrono::steady_clock::now();
    config.dim = dim;
    QuantizedLayer candidate = rtn_quantize(weight, config);
    const double err = reconstruction_error_against(reference, candidate, input);
    const double ms = detail::elapsed_ms(start);
    if (dim == QuantDim::PerOC) {
      report.err_oc = err;
      report.wall_time_ms_oc = ms;
    } else {
      report.err_ic = err;
      report.wall_time_ms_ic = ms;
    }
    if (!best || err < best_err) {
      best_err = err;
      best = std::move(candidate);
      report.chosen = dim;
    }
  }
  report.quantized_forward_passes = static_cast<std::uint32_t>(forward_call_count() - before_q);
  return {std::move(*best), std::move(report)};
}

// Dimension chosen by the RTN search, then one GPTQ solve along it with that
// dimension's default options (damping taken from `opts`).
inline AdaResult gptq_ada(const Tensor2D& weight, const Tensor2D& input, QuantConfig config,
                          const GptqOptions& opts = {}, std::string layer_id = {}) {
  AdaResult searched = rtn_ada(weight, input, config, std::move(layer_id));
  config.dim = searched.report.chosen;
  const auto state = accumulate_hessian(HessianState(weight.cols()), input);
  auto solved = gptq_quantize(weight, state, config, GptqOptions::defaults_for(config.dim, opts.damp_percent));
  searched.report.err_gptq = reconstruction_error(weight, solved.layer, input);
  return {std::move(solved.layer), std::move(searched.report)};
}

enum class Method { Rtn, Gptq };
enum class Mode { Oc, Ic, Ada, HeuristicQkvDown };

inline const char* method_name(Method m) noexcept { return m == Method::Rtn ? "rtn" : "gptq"; }

inline const char* mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::Oc: return "oc";
    case Mode::Ic: return "ic";
    case Mode::Ada: return "ada";
    case Mode::HeuristicQkvDown: return "heuristic-qkvdown";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "rtn") return Method::Rtn;
  if (s == "gptq") return Method::Gptq;
  throw Error(Errc::Config, "unknown method '" + s + "' (expected rtn|gptq)");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "oc") return Mode::Oc;
  if (s == "ic") return Mode::Ic;
  if (s == "ada") return Mode::Ada;
  if (s == "heuristic-qkvdown") return Mode::HeuristicQkvDown;
  throw Error(Errc::Config, "unknown mode '" + s + "' (expected oc|ic|ada|heuristic-qkvdown)");
}

// Fixed preset: per-IC for attention QKV and MLP down projections, per-OC elsewhere.
inline QuantDim heuristic_qkvdown_dim(const std::string& layer_id) {
  for (const char* key : {"q_proj", "k_proj", "v_proj", "qkv", "down"}) {
    if (layer_id.find(key) != std::string::npos) return QuantDim::PerIC;
  }
  return QuantDim::PerOC;
}

struct LayerEntry {
  std::string id;
  std::filesystem::path weight_npy;
  std::filesystem::path calib_npy;
};

struct Manifest {
  std::vector<LayerEntry> layers;
};

struct LayerOutcome {
  std::string id;
  std::optional<QuantizedLayer> layer;
  DimReport report;
  std::optional<Error> error;

  bool ok() const noexcept { return !error.has_value(); }
};

struct ModelSettings {
  Method method = Method::Rtn;
  Mode mode = Mode::Ada;
  QuantConfig config;
  // Used for fixed modes; ada/heuristic use per-dim defaults with this damping.
  GptqOptions gptq;
};

// Quantize one already-loaded layer according to the settings.
inline AdaResult quantize_layer(const Tensor2D& weight, const Tensor2D& input, const ModelSettings& s,
                                const std::string& id) {
  if (s.mode == Mode::Ada) {
    return s.method == Method::Rtn ? rtn_ada(weight, input, s.config, id)
                                   : gptq_ada(weight, input, s.config, s.gptq, id);
  }
  detail::check_layer_shapes(weight, input);
  QuantConfig config = s.config;
  GptqOptions opts = s.gptq;
  if (s.mode == Mode::HeuristicQkvDown) {
    config.dim = heuristic_qkvdown_dim(id);
    opts = GptqOptions::defaults_for(config.dim, s.gptq.damp_percent);
  } else {
    config.dim = s.mode == Mode::Oc ? QuantDim::PerOC : QuantDim::PerIC;
  }

  DimReport report;
  report.layer_id = id;
  report.chosen = config.dim;
  const auto start = std::chrono::steady_clock::now();
  const auto before_ref = forward_call_count();
  const Tensor2D reference = forward(weight, input);
  report.reference_forward_passes = static_cast<std::uint32_t>(forward_call_count() - before_ref);

  QuantizedLayer layer;
  if (s.method == Method::Rtn) {
    layer = rtn_quantize(weight, config);
  } else {
    const auto state = accumulate_hessian(HessianState(weight.cols()), input);
    layer = gptq_quantize(weight, state, config, opts).layer;
  }
  const auto before_q = forward_call_count();
  const double err = reconstruction_error_against(reference, layer, input);
  report.quantized_forward_passes = static_cast<std::uint32_t>(forward_call_count() - before_q);
  (config.dim == QuantDim::PerOC ? report.err_oc : report.err_ic) = err;
  (config.dim == QuantDim::PerOC ? report.wall_time_ms_oc : report.wall_time_ms_ic) = detail::elapsed_ms(start);
  if (s.method == Method::Gptq) report.err_gptq = err;
  return {std::move(layer), std::move(report)};
}

inline LayerOutcome quantize_manifest_layer(const LayerEntry& entry, const ModelSettings& settings) {
  LayerOutcome out;
  out.id = entry.id;
  out.report.layer_id = entry.id;
  try {
    const Tensor2D weight = npy::read(entry.weight_npy);
    const Tensor2D input = npy::read(entry.calib_npy);
    auto result = quantize_layer(weight, input, settings, entry.id);
    out.layer = std::move(result.layer);
    out.report = std::move(result.report);
  } catch (const Error& e) {
    out.error = e;
  }
  return out;
}

// Layers are independent; results are returned in manifest order regardless of `jobs`.
inline std::vector<LayerOutcome> quantize_model(const Manifest& manifest, const ModelSettings& settings,
                                                std::size_t jobs = 1) {
  settings.config.validate();
  if (settings.mode != Mode::Ada && settings.mode != Mode::HeuristicQkvDown) {
    settings.gptq.validate(settings.mode == Mode::Oc ? QuantDim::PerOC : QuantDim::PerIC);
  }
  std::vector<LayerOutcome> outcomes(manifest.layers.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
      outcomes[i] = quantize_manifest_layer(manifest.layers[i], settings);
    }
    return outcomes;
  }
  for (std::size_t base = 0; base < manifest.layers.size(); base += jobs) {
    std::vector<std::future<LayerOutcome>> batch;
    const std::size_t end = std::min(manifest.layers.size(), base + jobs);
    for (std::size_t i = base; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, quantize_manifest_layer, std::cref(manifest.layers[i]),
                                 std::cref(settings)));
    }
    for (std::size_t i = base; i < end; ++i) outcomes[i] = batch[i - base].get();
  }
  return outcomes;
}

}  // namespace adadim
