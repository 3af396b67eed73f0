#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "adadim/adadim.hpp"
#include "adadim/artifact.hpp"
#include "adadim/error.hpp"
#include "adadim/npy.hpp"

namespace adadim {

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline nlohmann::json to_json(const DimReport& r) {
  nlohmann::json j = {
      {"layer_id", r.layer_id},
      {"err_oc", detail::finite_or_null(r.err_oc)},
      {"err_ic", detail::finite_or_null(r.err_ic)},
      {"chosen", dim_name(r.chosen)},
      {"searched", r.searched},
      {"reference_forward_passes", r.reference_forward_passes},
      {"quantized_forward_passes", r.quantized_forward_passes},
      {"wall_time_ms", {{"oc", r.wall_time_ms_oc}, {"ic", r.wall_time_ms_ic}}},
      {"err_gptq", r.err_gptq ? detail::finite_or_null(*r.err_gptq) : nlohmann::json(nullptr)},
  };
  return j;
}

inline DimReport dim_report_from_json(const nlohmann::json& j) {
  DimReport r;
  r.layer_id = j.at("layer_id").get<std::string>();
  r.err_oc = detail::number_or_nan(j.at("err_oc"));
  r.err_ic = detail::number_or_nan(j.at("err_ic"));
  const auto chosen = j.at("chosen").get<std::string>();
  if (chosen != "oc" && chosen != "ic") throw Error(Errc::Config, "report chosen must be oc or ic");
  r.chosen = chosen == "oc" ? QuantDim::PerOC : QuantDim::PerIC;
  r.searched = j.at("searched").get<bool>();
  r.reference_forward_passes = j.at("reference_forward_passes").get<std::uint32_t>();
  r.quantized_forward_passes = j.at("quantized_forward_passes").get<std::uint32_t>();
  r.wall_time_ms_oc = j.at("wall_time_ms").at("oc").get<double>();
  r.wall_time_ms_ic = j.at("wall_time_ms").at("ic").get<double>();
  if (j.at("err_gptq").is_number()) r.err_gptq = j.at("err_gptq").get<double>();
  return r;
}

inline nlohmann::json header_json(const PackedArtifact& a) {
  return {{"magic", std::string(kArtifactMagic)},
          {"version", a.header.version},
          {"bits", a.header.bits},
          {"dim", dim_name(a.header.dim)},
          {"oc", a.header.oc},
          {"ic", a.header.ic},
          {"group_size", a.header.group().to_string()},
          {"param_count", a.param_count()},
          {"payload_bytes", a.payload.size()},
          {"column_order", !a.column_order.empty()}};
}

// Manifest schema: {"layers": [{"id", "weight_npy", "calib_npy"}]}. Relative
// paths resolve against the manifest's directory.
inline Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  auto fail = [](const std::string& path, const std::string& what) {
    throw Error(Errc::Config, "manifest " + path + ": " + what);
  };
  if (!j.is_object()) fail("$", "expected an object");
  if (!j.contains("layers")) fail("$.layers", "missing required key");
  const auto& layers = j.at("layers");
  if (!layers.is_array()) fail("$.layers", "expected an array");
  Manifest m;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string at = "$.layers[" + std::to_string(i) + "]";
    const auto& entry = layers[i];
    if (!entry.is_object()) fail(at, "expected an object");
    LayerEntry layer;
    for (const char* key : {"id", "weight_npy", "calib_npy"}) {
      if (!entry.contains(key)) fail(at + "." + key, "missing required key");
      if (!entry.at(key).is_string()) fail(at + "." + key, "expected a string");
    }
    layer.id = entry.at("id").get<std::string>();
    if (layer.id.empty()) fail(at + ".id", "must be non-empty");
    for (const auto& prev : m.layers) {
      if (prev.id == layer.id) fail(at + ".id", "duplicate layer id '" + layer.id + "'");
    }
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    layer.weight_npy = resolve(entry.at("weight_npy").get<std::string>());
    layer.calib_npy = resolve(entry.at("calib_npy").get<std::string>());
    m.layers.push_back(std::move(layer));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  const std::string text = npy::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::Config, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

inline nlohmann::json manifest_json(const Manifest& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"id", l.id}, {"weight_npy", l.weight_npy.string()}, {"calib_npy", l.calib_npy.string()}});
  }
  return {{"layers", layers}};
}

}  // namespace adadim
