// adadim command-line tool: quantize | eval | ablate | synth | bench | inspect

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adadim/all.hpp"

namespace fs = std::filesystem;
using namespace adadim;

namespace {

struct QuantFlags {
  int wbits = 3;
  std::string groupsize = "128";
  std::string dim = "ada";
  std::string method = "rtn";
  bool act_order = false;
  bool static_groups = false;
  CLI::Option* act_order_opt = nullptr;
  CLI::Option* static_groups_opt = nullptr;
  double damp = 0.01;

  void add_to(CLI::App& cmd, bool with_method) {
    cmd.add_option("--wbits", wbits, "Weight bit width")->check(CLI::IsMember({2, 3, 4, 8}));
    cmd.add_option("--groupsize", groupsize, "Group size N or 'full'");
    if (with_method) {
      cmd.add_option("--dim", dim, "Grouping dimension")->check(CLI::IsMember({"oc", "ic", "ada", "heuristic-qkvdown"}));
      cmd.add_option("--method", method, "Quantization method")->check(CLI::IsMember({"rtn", "gptq"}));
      act_order_opt = cmd.add_flag("--act-order,!--no-act-order", act_order, "GPTQ activation reordering");
      static_groups_opt = cmd.add_flag("--static-groups,!--no-static-groups", static_groups, "GPTQ static groups");
    }
    cmd.add_option("--damp", damp, "GPTQ damping as a fraction of mean diag(H)");
  }

  GroupSize group() const {
    if (groupsize == "full") return GroupSize::full();
    std::size_t n = 0;
    try {
      std::size_t used = 0;
      n = std::stoul(groupsize, &used);
      if (used != groupsize.size()) throw std::invalid_argument(groupsize);
    } catch (const std::exception&) {
      throw Error(Errc::Config, "--groupsize must be a positive integer or 'full', got '" + groupsize + "'");
    }
    if (n == 0) throw Error(Errc::Config, "--groupsize must be >= 1");
    return GroupSize(n);
  }

  RunConfig run_config() const {
    RunConfig c;
    c.method = parse_method(method);
    c.mode = parse_mode(dim);
    c.bits = wbits;
    c.group_size = group();
    if (act_order_opt && act_order_opt->count() > 0) c.act_order = act_order;
    if (static_groups_opt && static_groups_opt->count() > 0) c.static_groups = static_groups;
    c.damp_percent = damp;
    return c;
  }
};

struct SynthFlags {
  SyntheticSpec spec;
  double weight_outlier_factor = 0.0;
  CLI::Option* wof_opt = nullptr;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--oc", spec.oc, "Output channels");
    cmd.add_option("--ic", spec.ic, "Input channels");
    cmd.add_option("--tokens", spec.tokens, "Calibration tokens");
    cmd.add_option("--outliers", spec.outlier_channels, "Number of activation outlier channels");
    cmd.add_option("--alpha", spec.outlier_factor, "Activation outlier magnitude factor");
    cmd.add_option("--weight-scale", spec.weight_scale, "Weight std multiplier (std = scale/sqrt(ic))");
    wof_opt = cmd.add_option("--weight-outlier-factor", weight_outlier_factor,
                             "Multiplier on W outlier columns (default 1/sqrt(alpha))");
    cmd.add_option("--seed", spec.seed, "Generator seed");
  }

  SyntheticSpec resolved() const {
    SyntheticSpec s = spec;
    if (wof_opt && wof_opt->count() > 0) s.weight_outlier_factor = weight_outlier_factor;
    return s;
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_quantize(const QuantFlags& flags, const std::string& manifest, const std::string& out, std::size_t jobs) {
  RunConfig config = flags.run_config();
  config.jobs = jobs;
  config.validate();
  const auto result = run_pipeline(config, read_manifest(manifest), out);
  print_json(result.summary);
  for (const auto& o : result.outcomes) {
    if (!o.ok()) {
      std::cerr << nlohmann::json{{"layer", o.id}, {"error", errc_name(o.error->code())}, {"message", o.error->what()}}
                       .dump()
                << "\n";
    }
  }
  return result.exit_code;
}

int cmd_eval(const std::string& manifest_path, const std::string& artifacts, const std::string& artifact,
             const std::string& weight, const std::string& calib) {
  nlohmann::json rows = nlohmann::json::array();
  auto eval_one = [&](const std::string& id, const fs::path& a, const fs::path& w, const fs::path& x) {
    const auto layer = read_artifact(a);
    const double err = reconstruction_error(npy::read(w), layer, npy::read(x));
    rows.push_back({{"id", id}, {"dim", dim_name(layer.config.dim)}, {"recon_error", err}});
  };
  if (!manifest_path.empty()) {
    if (artifacts.empty()) throw Error(Errc::Config, "eval --manifest requires --artifacts DIR");
    for (const auto& l : read_manifest(manifest_path).layers) {
      eval_one(l.id, fs::path(artifacts) / (artifact_filename(l.id) + ".adim"), l.weight_npy, l.calib_npy);
    }
  } else {
    if (artifact.empty() || weight.empty() || calib.empty()) {
      throw Error(Errc::Config, "eval needs --manifest/--artifacts or --artifact/--weight/--calib");
    }
    eval_one(fs::path(artifact).stem().string(), artifact, weight, calib);
  }
  print_json(rows);
  return 0;
}

std::vector<AblationLayer> synthetic_layers(const SyntheticSpec& spec) {
  auto s = gen_synthetic(spec);
  std::vector<AblationLayer> layers;
  layers.push_back({"synthetic", std::move(s.weight), std::move(s.input)});
  return layers;
}

int cmd_ablate(const QuantFlags& flags, const SynthFlags& synth, const std::string& manifest_path,
               const std::string& grid_path, const std::string& preset, const std::string& out) {
  std::vector<GridEntry> grid;
  if (!grid_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(npy::read_file(grid_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::Config, "grid file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("grid") || !j.at("grid").is_array()) {
      throw Error(Errc::Config, "grid $.grid: expected an array");
    }
    for (std::size_t i = 0; i < j.at("grid").size(); ++i) {
      grid.push_back(grid_entry_from_json(j.at("grid")[i], "$.grid[" + std::to_string(i) + "]"));
    }
  } else if (preset == "default" || preset == "with-heuristic") {
    grid = default_grid(preset == "with-heuristic");
  } else {
    throw Error(Errc::Config, "unknown preset '" + preset + "' (default|with-heuristic)");
  }

  std::vector<AblationLayer> layers;
  if (!manifest_path.empty()) {
    for (const auto& l : read_manifest(manifest_path).layers) {
      layers.push_back({l.id, npy::read(l.weight_npy), npy::read(l.calib_npy)});
    }
  } else {
    layers = synthetic_layers(synth.resolved());
  }

  const auto result = run_ablation(grid, layers, QuantConfig{flags.wbits, flags.group(), QuantDim::PerOC}, flags.damp);
  for (const auto& [entry, why] : result.rejected) {
    std::cerr << nlohmann::json{{"rejected", entry.label()}, {"reason", why}}.dump() << "\n";
  }
  const std::string csv = ablation_csv(result.rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    npy::write_file(out, csv);
  }
  return result.rejected.empty() ? 0 : 1;
}

int cmd_synth(const SynthFlags& flags, std::size_t layers, const std::string& out) {
  if (layers == 0) throw Error(Errc::Config, "--layers must be >= 1");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + out + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json outliers = nlohmann::json::object();
  for (std::size_t i = 0; i < layers; ++i) {
    SyntheticSpec spec = flags.resolved();
    spec.seed = flags.spec.seed + i;
    const auto layer = gen_synthetic(spec);
    const std::string id = "layer" + std::to_string(i);
    npy::write(fs::path(out) / (id + ".weight.npy"), layer.weight);
    npy::write(fs::path(out) / (id + ".calib.npy"), layer.input);
    entries.push_back({{"id", id}, {"weight_npy", id + ".weight.npy"}, {"calib_npy", id + ".calib.npy"}});
    outliers[id] = layer.outliers;
  }
  npy::write_file(fs::path(out) / "manifest.json", nlohmann::json{{"layers", entries}}.dump(2) + "\n");
  print_json({{"manifest", (fs::path(out) / "manifest.json").string()}, {"outliers", outliers}});
  return 0;
}

int cmd_bench(const std::string& artifact, const QuantFlags& flags, const SynthFlags& synth, const std::string& dim,
              std::size_t reps) {
  PackedArtifact packed;
  if (!artifact.empty()) {
    packed = read_packed_artifact(artifact);
  } else {
    const auto layer = gen_synthetic(synth.resolved());
    const QuantConfig config{flags.wbits, flags.group(), dim == "ic" ? QuantDim::PerIC : QuantDim::PerOC};
    packed = pack_layer(rtn_quantize(layer.weight, config));
  }
  print_json(to_json(bench_dequant(packed, reps)));
  return 0;
}

int cmd_inspect(const std::string& path) {
  const std::string bytes = npy::read_file(path);
  if (bytes.compare(0, kArtifactMagic.size(), kArtifactMagic) == 0) {
    print_json(header_json(parse_artifact(bytes)));
    return 0;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(Errc::BadMagic, path + " is neither a packed artifact nor a JSON report");
  }
  if (j.contains("layer_id")) j = to_json(dim_report_from_json(j));
  print_json(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-only group quantization with adaptive per-OC/per-IC dimension search"};
  app.require_subcommand(1);

  QuantFlags qflags;
  std::string manifest, out;
  std::size_t jobs = 1;
  auto* quantize = app.add_subcommand("quantize", "Quantize every layer of a manifest");
  qflags.add_to(*quantize, true);
  quantize->add_option("--manifest", manifest, "Manifest JSON")->required();
  quantize->add_option("--out", out, "Output directory")->required();
  quantize->add_option("--jobs", jobs, "Layers processed in parallel");

  std::string artifacts, artifact, weight, calib;
  auto* eval = app.add_subcommand("eval", "Reconstruction error of artifacts against original layers");
  eval->add_option("--manifest", manifest, "Manifest JSON");
  eval->add_option("--artifacts", artifacts, "Directory holding <id>.adim");
  eval->add_option("--artifact", artifact, "Single artifact");
  eval->add_option("--weight", weight, "Original weight NPY");
  eval->add_option("--calib", calib, "Calibration activation NPY");

  QuantFlags aflags;
  SynthFlags asynth;
  std::string grid, preset = "default", csv_out;
  auto* ablate = app.add_subcommand("ablate", "Run the option grid and emit a CSV table");
  aflags.add_to(*ablate, false);
  asynth.add_to(*ablate);
  ablate->add_option("--manifest", manifest, "Manifest JSON (default: one synthetic layer)");
  ablate->add_option("--grid", grid, "Grid JSON {\"grid\": [{method, mode, act_order, static_groups}]}");
  ablate->add_option("--preset", preset, "default | with-heuristic");
  ablate->add_option("--out", csv_out, "CSV output path (default stdout)");

  SynthFlags sflags;
  std::size_t layers = 2;
  auto* synth = app.add_subcommand("synth", "Write a synthetic outlier workload and manifest");
  sflags.add_to(*synth);
  synth->add_option("--layers", layers, "Number of layers");
  synth->add_option("--out", out, "Output directory")->required();

  QuantFlags bflags;
  SynthFlags bsynth;
  std::string bench_dim = "ic";
  std::size_t reps = 20;
  auto* bench = app.add_subcommand("bench", "Dequantization layout microbenchmark");
  bench->add_option("--artifact", artifact, "Packed artifact (default: synthetic RTN layer)");
  bflags.add_to(*bench, false);
  bsynth.add_to(*bench);
  bench->add_option("--dim", bench_dim, "Layout for the synthetic layer")->check(CLI::IsMember({"oc", "ic"}));
  bench->add_option("--reps", reps, "Timed repetitions");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print an artifact header or a report");
  inspect->add_option("path", inspect_path, "Artifact or JSON report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }

  try {
    if (*quantize) return cmd_quantize(qflags, manifest, out, jobs);
    if (*eval) return cmd_eval(manifest, artifacts, artifact, weight, calib);
    if (*ablate) return cmd_ablate(aflags, asynth, manifest, grid, preset, csv_out);
    if (*synth) return cmd_synth(sflags, layers, out);
    if (*bench) return cmd_bench(artifact, bflags, bsynth, bench_dim, reps);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", errc_name(e.code())}, {"message", e.what()}}.dump() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
