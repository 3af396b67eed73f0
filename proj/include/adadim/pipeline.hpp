#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "adadim/adadim.hpp"
#include "adadim/artifact.hpp"
#include "adadim/error.hpp"
#include "adadim/gptq.hpp"
#include "adadim/npy.hpp"
#include "adadim/quant.hpp"
#include "adadim/report.hpp"

namespace adadim {

struct RunConfig {
  Method method = Method::Rtn;
  Mode mode = Mode::Ada;
  int bits = 3;
  GroupSize group_size{128};
  // Unset means the per-dimension default (oc: reorder + static, ic: reorder).
  std::optional<bool> act_order;
  std::optional<bool> static_groups;
  double damp_percent = 0.01;
  // Calibration sizing used when sampling real activations: samples x sequence length.
  std::size_t calib_samples = 256;
  std::size_t calib_seq_len = 512;
  std::size_t jobs = 1;

  QuantConfig quant_config() const { return {bits, group_size, QuantDim::PerOC}; }

  void validate() const {
    quant_config().validate();
    if (mode == Mode::Ic && static_groups.value_or(false)) {
      throw Error(Errc::Config, "--static-groups is not valid with --dim ic (per-IC params are already contiguous)");
    }
    if (method == Method::Rtn && (static_groups.value_or(false) || act_order.value_or(false))) {
      throw Error(Errc::Config, "--act-order/--static-groups apply only to --method gptq");
    }
    if (!(damp_percent >= 0.0)) throw Error(Errc::Config, "--damp must be >= 0");
  }

  ModelSettings settings() const {
    validate();
    ModelSettings s;
    s.method = method;
    s.mode = mode;
    s.config = quant_config();
    const QuantDim dim = mode == Mode::Ic ? QuantDim::PerIC : QuantDim::PerOC;
    s.gptq = GptqOptions::defaults_for(dim, damp_percent);
    if (act_order) s.gptq.act_order = *act_order;
    if (static_groups) s.gptq.static_groups = *static_groups;
    return s;
  }
};

inline std::string artifact_filename(const std::string& id) {
  std::string name;
  for (char ch : id) {
    const bool safe = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                      ch == '-' || ch == '_' || ch == '.';
    name.push_back(safe ? ch : '_');
  }
  return name;
}

struct PipelineResult {
  int exit_code = 0;
  std::vector<LayerOutcome> outcomes;
  nlohmann::json summary;
};

inline nlohmann::json summarize(const RunConfig& config, const std::vector<LayerOutcome>& outcomes) {
  std::size_t per_ic = 0, per_oc = 0;
  double base_err = 0.0, chosen_err = 0.0, final_err = 0.0;
  std::size_t searched = 0;
  nlohmann::json failed = nlohmann::json::array();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& o : outcomes) {
    if (!o.ok()) {
      failed.push_back({{"id", o.id}, {"error", errc_name(o.error->code())}, {"message", o.error->what()}});
      continue;
    }
    (o.report.chosen == QuantDim::PerIC ? per_ic : per_oc) += 1;
    final_err += o.report.err_gptq.value_or(o.report.chosen_error());
    if (o.report.searched) {
      ++searched;
      base_err += o.report.err_oc;
      chosen_err += o.report.chosen_error();
    }
    layers.push_back({{"id", o.id}, {"chosen", dim_name(o.report.chosen)}});
  }
  return {{"method", method_name(config.method)},
          {"mode", mode_name(config.mode)},
          {"bits", config.bits},
          {"group_size", config.group_size.to_string()},
          {"layers_total", outcomes.size()},
          {"layers_ok", outcomes.size() - failed.size()},
          {"per_ic", per_ic},
          {"per_oc", per_oc},
          {"layers", layers},
          {"failed", failed},
          {"total_error", final_err},
          // Summed per-OC RTN error over summed chosen RTN error, searched layers only.
          {"error_savings_ratio",
           searched > 0 && chosen_err > 0.0 ? nlohmann::json(base_err / chosen_err) : nlohmann::json(nullptr)}};
}

// Quantize every manifest layer and write <id>.adim, <id>.report.json and summary.json.
inline PipelineResult run_pipeline(const RunConfig& config, const Manifest& manifest,
                                   const std::filesystem::path& out_dir) {
  const ModelSettings settings = config.settings();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  PipelineResult result;
  result.outcomes = quantize_model(manifest, settings, config.jobs);
  for (auto& o : result.outcomes) {
    if (!o.ok()) continue;
    try {
      const std::string stem = artifact_filename(o.id);
      write_artifact(out_dir / (stem + ".adim"), *o.layer);
      npy::write_file(out_dir / (stem + ".report.json"), to_json(o.report).dump(2) + "\n");
    } catch (const Error& e) {
      o.error = e;
    }
  }
  result.summary = summarize(config, result.outcomes);
  npy::write_file(out_dir / "summary.json", result.summary.dump(2) + "\n");
  for (const auto& o : result.outcomes) {
    if (!o.ok()) {
      result.exit_code = exit_code(o.error->code());
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ablation grid

struct GridEntry {
  Method method = Method::Rtn;
  Mode mode = Mode::Oc;
  bool act_order = false;
  bool static_groups = false;

  std::string label() const {
    std::string s = std::string(method_name(method)) + "-" + mode_name(mode);
    if (act_order) s += "-reorder";
    if (static_groups) s += "-static";
    return s;
  }

  auto key() const { return std::tuple(static_cast<int>(method), static_cast<int>(mode), act_order, static_groups); }

  friend bool operator==(const GridEntry& a, const GridEntry& b) { return a.key() == b.key(); }
};

// Empty string when legal, otherwise the reason.
inline std::string grid_violation(const GridEntry& e) {
  if (e.method == Method::Rtn && (e.act_order || e.static_groups)) return "rtn takes no gptq options";
  if (e.static_groups && e.mode == Mode::Ic) return "static groups are not defined for per-IC";
  if (e.method == Method::Gptq && (e.mode == Mode::Ada || e.mode == Mode::HeuristicQkvDown) &&
      (e.act_order || e.static_groups)) {
    return "searched modes use the per-dimension gptq defaults";
  }
  return {};
}

// rtn x {oc, ic, ada}; gptq per-OC default / reorder+static; gptq per-IC reorder.
inline std::vector<GridEntry> default_grid(bool with_heuristic = false) {
  std::vector<GridEntry> grid = {
      {Method::Rtn, Mode::Oc, false, false},   {Method::Rtn, Mode::Ic, false, false},
      {Method::Rtn, Mode::Ada, false, false},  {Method::Gptq, Mode::Oc, false, false},
      {Method::Gptq, Mode::Oc, true, true},    {Method::Gptq, Mode::Ic, true, false},
  };
  if (with_heuristic) grid.push_back({Method::Rtn, Mode::HeuristicQkvDown, false, false});
  return grid;
}

inline GridEntry grid_entry_from_json(const nlohmann::json& j, const std::string& at) {
  auto fail = [&](const std::string& key, const std::string& what) {
    throw Error(Errc::Config, "grid " + at + "." + key + ": " + what);
  };
  if (!j.is_object()) throw Error(Errc::Config, "grid " + at + ": expected an object");
  GridEntry e;
  for (const char* key : {"method", "mode"}) {
    if (!j.contains(key) || !j.at(key).is_string()) fail(key, "expected a string");
  }
  e.method = parse_method(j.at("method").get<std::string>());
  e.mode = parse_mode(j.at("mode").get<std::string>());
  for (const char* key : {"act_order", "static_groups"}) {
    if (j.contains(key) && !j.at(key).is_boolean()) fail(key, "expected a boolean");
  }
  e.act_order = j.value("act_order", false);
  e.static_groups = j.value("static_groups", false);
  return e;
}

struct AblationLayer {
  std::string id;
  Tensor2D weight;
  Tensor2D input;
};

struct AblationRow {
  std::string layer_id;
  GridEntry entry;
  double recon_error = 0.0;
  double wall_time_ms = 0.0;
  QuantDim chosen = QuantDim::PerOC;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<GridEntry, std::string>> rejected;
};

// One row per legal entry per layer, sorted by (method, mode, act_order,
// static_groups) and then by layer order. Illegal entries are skipped and
// listed in `rejected`.
inline AblationResult run_ablation(std::vector<GridEntry> grid, const std::vector<AblationLayer>& layers,
                                   const QuantConfig& base, double damp_percent = 0.01) {
  base.validate();
  AblationResult result;
  std::vector<GridEntry> legal;
  for (const auto& e : grid) {
    auto why = grid_violation(e);
    if (!why.empty()) {
      result.rejected.emplace_back(e, why);
    } else if (std::find(legal.begin(), legal.end(), e) == legal.end()) {
      legal.push_back(e);
    }
  }
  std::stable_sort(legal.begin(), legal.end(), [](const GridEntry& a, const GridEntry& b) { return a.key() < b.key(); });

  for (const auto& e : legal) {
    ModelSettings s;
    s.method = e.method;
    s.mode = e.mode;
    s.config = base;
    s.gptq = {e.act_order, e.static_groups, damp_percent};
    for (const auto& layer : layers) {
      const auto start = std::chrono::steady_clock::now();
      const auto out = quantize_layer(layer.weight, layer.input, s, layer.id);
      AblationRow row;
      row.wall_time_ms = detail::elapsed_ms(start);
      row.layer_id = layer.id;
      row.entry = e;
      row.recon_error = out.report.err_gptq.value_or(out.report.chosen_error());
      row.chosen = out.report.chosen;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "layer,method,mode,act_order,static_groups,recon_error,wall_time_ms,chosen_dim\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.layer_id << ',' << method_name(r.entry.method) << ',' << mode_name(r.entry.mode) << ','
        << (r.entry.act_order ? "true" : "false") << ',' << (r.entry.static_groups ? "true" : "false") << ','
        << r.recon_error << ',' << r.wall_time_ms << ',' << dim_name(r.chosen) << '\n';
  }
  return out.str();
}

}  // namespace adadim
