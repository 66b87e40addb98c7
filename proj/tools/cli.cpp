#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "msq/error.hpp"
#include "msq/fpga_model.hpp"
#include "msq/kernel.hpp"
#include "msq/partition.hpp"
#include "msq/quantizers.hpp"
#include "msq/serialize.hpp"
#include "msq/tensor_io.hpp"
#include "msq/train.hpp"

namespace fs = std::filesystem;

namespace msq::cli {

namespace {

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::vector<std::string> configs;
  std::string out;
  std::string format = "csv";
};

Json merged_config(const Globals& g) {
  Json cfg = Json::object();
  for (const auto& path : g.configs) {
    Json j;
    try {
      j = parse_json(read_file(path), "config " + path);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " is not a JSON object");
    cfg.update(j);
  }
  return cfg;
}

template <typename T>
T pick(const std::optional<T>& flag, const Json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

const std::string& require_out(const Globals& g) {
  if (g.out.empty()) throw ConfigError("--out is required");
  return g.out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

RowPartition partition_for(const Matrix2D& w, double pr_sp2) {
  if (w.cols() < 2) return partition_rows(std::vector<double>(w.rows(), 0.0), pr_sp2);
  return partition_layer(w, pr_sp2);
}

MixedScheme schemes_from(const Json& cfg, std::optional<int> fixed_bits, std::optional<int> m1,
                         std::optional<int> m2) {
  MixedScheme s;
  s.fixed.bits = pick(fixed_bits, cfg, "fixed_bits", 4);
  s.sp2.m1 = pick(m1, cfg, "sp2_m1", 2);
  s.sp2.m2 = pick(m2, cfg, "sp2_m2", 1);
  validate(QuantScheme{s.fixed});
  validate(QuantScheme{s.sp2});
  return s;
}

// Writes every (path, contents) pair to a temp file first and renames only
// after all temps are complete.
void write_all_atomic(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> temps;
  try {
    for (const auto& [path, contents] : files) {
      auto tmp = path;
      tmp += ".tmp";
      std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
      if (!o) throw InputError("cannot write " + tmp.string());
      temps.push_back(tmp);
      o.write(contents.data(), static_cast<std::streamsize>(contents.size()));
      if (!o) throw InputError("write failed for " + tmp.string());
    }
  } catch (...) {
    for (const auto& t : temps) fs::remove(t);
    throw;
  }
  for (std::size_t i = 0; i < files.size(); ++i) fs::rename(temps[i], files[i].first);
}

// ---------------------------------------------------------------------------
// quantize
// ---------------------------------------------------------------------------

struct QuantizeArgs {
  std::string input;
  std::string name = "layer";
  std::string values;
  std::optional<double> pr_sp2, alpha;
  std::optional<int> fixed_bits, m1, m2, act_bits;
};

int cmd_quantize(const Globals& g, const QuantizeArgs& a, std::ostream& out) {
  const Json cfg = merged_config(g);
  const auto& out_path = require_out(g);
  const double pr = pick(a.pr_sp2, cfg, "pr_sp2", 0.5);
  const MixedScheme schemes = schemes_from(cfg, a.fixed_bits, a.m1, a.m2);
  const int act_bits = pick(a.act_bits, cfg, "act_bits", 4);

  const Matrix2D w = read_matrix(a.input);
  if (w.empty()) throw InputError("quantize: empty weight matrix");
  const RowPartition part = partition_for(w, pr);
  const double alpha = a.alpha ? *a.alpha : (cfg.contains("alpha") ? cfg.at("alpha").get<double>()
                                                                     : choose_alpha(w, part, schemes));
  auto proj = project_matrix(w, part, schemes, alpha);
  proj.layer.name = a.name;
  proj.layer.act_bits = act_bits;

  std::map<double, std::size_t> hist;
  for (double v : proj.values.data()) ++hist[v];
  Json histogram = Json::array();
  for (const auto& [v, n] : hist) histogram.push_back(Json{{"value", v}, {"count", n}});
  Json row_schemes = Json::array();
  for (auto s : part.assignments) row_schemes.push_back(std::string(to_string(s)));

  double mse = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = proj.values.data()[i] - w.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(w.size());

  Json summary{{"name", a.name},
               {"rows", w.rows()},
               {"cols", w.cols()},
               {"alpha", alpha},
               {"pr_sp2", pr},
               {"theta", part.theta},
               {"sp2_rows", part.sp2_count()},
               {"fixed_rows", part.rows() - part.sp2_count()},
               {"distinct_levels", hist.size()},
               {"mse", mse},
               {"row_schemes", row_schemes},
               {"level_histogram", histogram}};
  Json doc = to_json(proj.layer);
  doc["summary"] = summary;

  std::vector<std::pair<fs::path, std::string>> files{{out_path, dump(doc)}};
  if (!a.values.empty()) files.emplace_back(a.values, encode_matrix(proj.values));
  write_all_atomic(files);
  out << dump(summary);
  return 0;
}

// ---------------------------------------------------------------------------
// partition
// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::string input;
  std::string name = "layer";
  std::optional<double> pr_sp2;
};

int cmd_partition(const Globals& g, const PartitionArgs& a, std::ostream& out) {
  const Json cfg = merged_config(g);
  const double pr = pick(a.pr_sp2, cfg, "pr_sp2", 0.5);
  const Matrix2D w = read_matrix(a.input);
  if (w.empty()) throw InputError("partition: empty weight matrix");
  const Json doc = to_json(partition_for(w, pr), a.name);
  if (!g.out.empty()) write_file_atomic(g.out, dump(doc));
  out << dump(doc);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string s = "epoch,loss,float_acc,quant_acc\n";
  for (const auto& m : history) {
    s += std::to_string(m.epoch) + "," + format_double(m.loss) + "," + format_double(m.float_acc) + "," +
         format_double(m.quant_acc) + "\n";
  }
  return s;
}

Matrix2D bias_matrix(const std::vector<double>& b) { return Matrix2D(1, b.size(), b); }

int cmd_train(const Globals& g, std::ostream& out) {
  const Json cfg = merged_config(g);
  const fs::path out_dir = require_out(g);

  TrainConfig tc;
  apply_json(tc, cfg);
  if (g.seed_given) tc.seed = g.seed;
  if (!g.seed_given && !cfg.contains("seed")) throw ConfigError("train: a seed is required (--seed or config 'seed')");
  tc.validate();

  BlobSpec blobs;
  std::size_t n_train = 1000, n_eval = 500;
  std::vector<std::size_t> hidden{16};
  bool baseline = true;
  try {
    const Json data = cfg.value("data", Json::object());
    blobs.num_classes = data.value("classes", 2);
    blobs.features = data.value("features", 2);
    blobs.separation = data.value("separation", 2.0);
    blobs.noise = data.value("noise", 1.0);
    n_train = data.value("train_samples", n_train);
    n_eval = data.value("eval_samples", n_eval);
    if (cfg.contains("hidden")) hidden = cfg.at("hidden").get<std::vector<std::size_t>>();
    baseline = cfg.value("baseline", true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }

  Rng train_rng(tc.seed ^ 0xD1B54A32D192ED03ULL);
  Rng eval_rng(tc.seed ^ 0x8CB92BA72F3D8DD7ULL);
  const Dataset train_set = make_synthetic(blobs, n_train, train_rng);
  const Dataset eval_set = make_synthetic(blobs, n_eval, eval_rng);

  std::vector<std::size_t> dims{static_cast<std::size_t>(blobs.features)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<std::size_t>(blobs.num_classes));
  Rng init_rng(tc.seed ^ 0xA0761D6478BD642FULL);
  const MlpModel init = MlpModel::init(dims, init_rng);

  std::optional<TrainResult> base;
  if (baseline && tc.quantize) {
    TrainConfig fc = tc;
    fc.quantize = false;
    base = train(init, train_set, fc, &eval_set);
  }
  const TrainResult res = train(init, train_set, tc, &eval_set);

  fs::path tmp = out_dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    Json layers = Json::array();
    const auto fwd = forward(res.model, eval_set.inputs, res.act_plan);
    for (std::size_t l = 0; l < res.model.layers.size(); ++l) {
      const std::string stem = "layer_" + std::to_string(l);
      const auto& layer = res.model.layers[l];
      write_file_atomic(tmp / (stem + ".weights.bin"), encode_matrix(layer.weight));
      write_file_atomic(tmp / (stem + ".bias.bin"), encode_matrix(bias_matrix(layer.bias)));
      Json entry{{"name", stem},
                 {"rows", layer.weight.rows()},
                 {"cols", layer.weight.cols()},
                 {"relu", layer.relu},
                 {"weights", stem + ".weights.bin"},
                 {"bias", stem + ".bias.bin"}};
      if (tc.quantize) {
        write_file_atomic(tmp / (stem + ".partition.json"), dump(to_json(res.layers[l].partition, stem)));
        write_file_atomic(tmp / (stem + ".quantized.json"), dump(to_json(res.layers[l])));
        entry["partition"] = stem + ".partition.json";
        entry["quantized"] = stem + ".quantized.json";
        entry["alpha"] = res.layers[l].alpha;
      }
      if (!res.act_plan.empty() && res.act_plan[l]) {
        write_file_atomic(tmp / (stem + ".inputs.bin"), encode_matrix(fwd.raw_inputs[l]));
        entry["inputs"] = stem + ".inputs.bin";
        entry["act_bits"] = res.act_plan[l]->bits;
        entry["act_clip"] = res.act_plan[l]->clip;
      }
      layers.push_back(entry);
    }
    write_file_atomic(tmp / "metrics.csv", metrics_csv(res.history));
    if (base) write_file_atomic(tmp / "baseline_metrics.csv", metrics_csv(base->history));

    Json summary{{"config", to_json(tc)},
                 {"dims", dims},
                 {"float_acc", res.float_acc},
                 {"quant_acc", res.quant_acc}};
    if (base) summary["baseline_acc"] = base->float_acc;
    Json model{{"summary", summary}, {"layers", layers}};
    write_file_atomic(tmp / "model.json", dump(model));

    fs::remove_all(out_dir);
    fs::rename(tmp, out_dir);
    out << dump(summary);
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// emulate
// ---------------------------------------------------------------------------

struct EmulateArgs {
  std::string layer;
  std::string acts;
  std::string stats;
  std::optional<int> act_bits;
  std::optional<double> act_clip, freq_mhz;
  std::optional<std::size_t> bat, blk_in, blk_out_fixed, blk_out_sp2;
};

int cmd_emulate(const Globals& g, const EmulateArgs& a, std::ostream& out) {
  const Json cfg = merged_config(g);
  const std::string out_path = require_out(g);
  const std::string stats_path = a.stats.empty() ? out_path + ".stats.json" : a.stats;

  QuantizedLayer layer = quantized_layer_from_json(parse_json(read_file(a.layer), a.layer));
  const Matrix2D acts = read_matrix(a.acts);
  layer.act_bits = pick(a.act_bits, cfg, "act_bits", layer.act_bits);
  const double max_act = acts.max_abs();
  const double clip = pick(a.act_clip, cfg, "act_clip", max_act > 0.0 ? max_act : 1.0);
  const ActQuant aq{layer.act_bits, clip};
  const ActCodes codes = quantize_activations(acts, aq);

  const GemmTile tile{pick(a.bat, cfg, "bat", std::size_t{1}), pick(a.blk_in, cfg, "blk_in", std::size_t{16}),
                      pick(a.blk_out_fixed, cfg, "blk_out_fixed", std::size_t{16}),
                      pick(a.blk_out_sp2, cfg, "blk_out_sp2", std::size_t{16})};
  const double freq = pick(a.freq_mhz, cfg, "freq_mhz", 100.0);

  const GemmResult res = hetero_gemm(codes.codes, layer, tile);
  const Matrix2D real = dequantize_output(res.out, layer, codes.scale);

  Json stats{{"layer", layer.name},
             {"batch", acts.rows()},
             {"rows", layer.rows},
             {"cols", layer.cols},
             {"tile", to_json(tile)},
             {"freq_mhz", freq},
             {"act_bits", aq.bits},
             {"act_clip", aq.clip},
             {"act_scale", codes.scale}};
  stats.update(to_json(res.stats));
  if (tile.blk_out_fixed >= 1) {
    const DesignPoint dp{"", tile.bat, tile.blk_in, tile.blk_out_fixed, tile.blk_out_sp2, freq};
    const auto est = estimate_layer_throughput(dp, res.stats);
    stats["peak_gops"] = peak_throughput(dp);
    stats["utilization"] = est.utilization;
    stats["est_gops"] = est.gops;
  }
  write_all_atomic({{out_path, encode_matrix(real)}, {stats_path, dump(stats)}});
  out << dump(stats);
  return 0;
}

// ---------------------------------------------------------------------------
// characterize
// ---------------------------------------------------------------------------

struct CharacterizeArgs {
  std::string device;
  std::string devices;
  std::optional<double> lut_cap, overhead;
  std::size_t step = 8;
};

fs::path default_device_db() {
  if (const char* env = std::getenv("MSQ_DEVICE_DB")) return env;
  return MSQ_DEFAULT_DEVICE_DB;
}

int cmd_characterize(const Globals& g, const CharacterizeArgs& a, std::ostream& out) {
  const Json cfg = merged_config(g);
  const auto db = load_device_db(a.devices.empty() ? default_device_db() : fs::path(a.devices));
  const DeviceProfile& prof = find_device(db, a.device);
  if (prof.calibration.size() < 2)
    throw ConfigError("device " + prof.device.name + " has no LUT calibration points");

  const Calibration cal = calibrate_lut_model(prof.calibration);
  const double cap = pick(a.lut_cap, cfg, "lut_cap", prof.lut_cap);
  const double overhead = pick(a.overhead, cfg, "loadstore_overhead_lut", prof.overhead_lut);
  const RatioSelection sel = select_ratio(prof.device, prof.base, cal.model, cap, overhead, a.step);
  const Device& d = prof.device;

  Json fragment{{"device", d.name},
                {"pr_sp2", sel.pr_sp2},
                {"bat", sel.design.bat},
                {"blk_in", sel.design.blk_in},
                {"blk_out_fixed", sel.design.blk_out_fixed},
                {"blk_out_sp2", sel.design.blk_out_sp2},
                {"freq_mhz", sel.design.freq_mhz},
                {"peak_gops", peak_throughput(sel.design)},
                {"predicted_lut", sel.predicted_lut},
                {"predicted_dsp", sel.predicted_dsp},
                {"lut_cap", cap},
                {"loadstore_overhead_lut", overhead},
                {"lut_model",
                 {{"base_lut", cal.model.base_lut},
                  {"lut_per_sp2_lane", cal.model.lut_per_sp2_lane},
                  {"dsp_per_fixed_lane", cal.model.dsp_per_fixed_lane},
                  {"max_residual", cal.max_residual},
                  {"max_relative_residual", cal.max_relative_residual}}}};

  const double dspf = static_cast<double>(d.dsp);
  if (g.format == "json") {
    Json cands = Json::array();
    for (const auto& c : sel.candidates) {
      cands.push_back(Json{{"blk_out_sp2", c.design.blk_out_sp2},
                           {"pr_sp2", c.design.pr_sp2()},
                           {"predicted_lut", c.predicted_lut},
                           {"lut_utilization", c.lut_utilization},
                           {"predicted_dsp", c.predicted_dsp},
                           {"peak_gops", c.peak_gops},
                           {"feasible", c.feasible}});
    }
    Json doc{{"device",
              {{"name", d.name},
               {"lut", d.lut},
               {"dsp", d.dsp},
               {"bram36", d.bram36},
               {"ff", d.ff},
               {"lut_per_dsp", d.lut / dspf},
               {"ff_per_dsp", d.ff / dspf},
               {"bram36_per_dsp", d.bram36 / dspf}}},
             {"candidates", cands},
             {"selection", fragment}};
    out << dump(doc);
  } else {
    out << "device,lut,dsp,bram36,ff,lut_per_dsp,ff_per_dsp,bram36_per_dsp\n"
        << d.name << "," << d.lut << "," << d.dsp << "," << format_double(d.bram36) << "," << d.ff << ","
        << format_double(d.lut / dspf) << "," << format_double(d.ff / dspf) << ","
        << format_double(d.bram36 / dspf) << "\n\n";
    out << "blk_out_sp2,pr_sp2,predicted_lut,lut_utilization,predicted_dsp,peak_gops,feasible\n";
    for (const auto& c : sel.candidates) {
      out << c.design.blk_out_sp2 << "," << format_double(c.design.pr_sp2()) << ","
          << format_double(c.predicted_lut) << "," << format_double(c.lut_utilization) << ","
          << format_double(c.predicted_dsp) << "," << format_double(c.peak_gops) << ","
          << (c.feasible ? "yes" : "no") << "\n";
    }
    out << "\nselected: fixed/sp2 = " << sel.design.blk_out_fixed << ":" << sel.design.blk_out_sp2
        << ", pr_sp2 = " << format_double(sel.pr_sp2) << "\n";
  }
  if (!g.out.empty()) write_file_atomic(g.out, dump(fragment));
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string metrics;
  std::vector<std::string> stats;
};

const std::vector<std::string> kReportColumns = {
    "source",      "layer",       "batch",     "rows",      "cols",      "macs_fixed", "macs_sp2",
    "idle_slots",  "cycles_ideal", "utilization", "peak_gops", "est_gops", "float_acc", "quant_acc"};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

int cmd_report(const Globals& g, const ReportArgs& a, std::ostream& out) {
  if (g.format != "csv" && g.format != "json") throw ConfigError("--format must be csv or json");

  Json float_acc = nullptr, quant_acc = nullptr;
  if (!a.metrics.empty()) {
    const auto lines = split(read_file(a.metrics), '\n');
    if (lines.empty() || lines[0] != "epoch,loss,float_acc,quant_acc")
      throw InputError("metrics file " + a.metrics + " has an unexpected header");
    for (std::size_t i = lines.size(); i-- > 1;) {
      if (lines[i].empty()) continue;
      const auto cells = split(lines[i], ',');
      if (cells.size() != 4) throw InputError("metrics file: malformed row " + std::to_string(i));
      try {
        float_acc = std::stod(cells[2]);
        quant_acc = std::stod(cells[3]);
      } catch (const std::exception&) {
        throw InputError("metrics file: non-numeric accuracy in row " + std::to_string(i));
      }
      break;
    }
  }

  Json rows = Json::array();
  for (const auto& path : a.stats) {
    const Json s = parse_json(read_file(path), path);
    Json r = Json::object();
    try {
      r["source"] = fs::path(path).filename().string();
      r["layer"] = s.at("layer");
      for (const char* k : {"batch", "rows", "cols", "macs_fixed", "macs_sp2", "idle_slots", "cycles_ideal"})
        r[k] = s.at(k);
      r["utilization"] = s.value("utilization", Json(nullptr));
      r["peak_gops"] = s.value("peak_gops", Json(nullptr));
      r["est_gops"] = s.value("est_gops", Json(nullptr));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("stats file " + path + ": " + e.what());
    }
    r["float_acc"] = float_acc;
    r["quant_acc"] = quant_acc;
    rows.push_back(r);
  }

  std::string text;
  if (g.format == "json") {
    text = dump(Json{{"columns", kReportColumns}, {"rows", rows}});
  } else {
    for (std::size_t i = 0; i < kReportColumns.size(); ++i) text += (i ? "," : "") + kReportColumns[i];
    text += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < kReportColumns.size(); ++i)
        text += (i ? "," : "") + csv_cell(r.at(kReportColumns[i]));
      text += "\n";
    }
  }
  if (!g.out.empty()) {
    write_file_atomic(g.out, text);
  } else {
    out << text;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixed-scheme (fixed-point + SP2) quantization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--config", g.configs, "JSON config file (repeatable, later files win)");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Partition and quantize a weight matrix");
  quantize->add_option("--input,input", qa.input, "Weight matrix file")->required();
  quantize->add_option("--name", qa.name, "Layer name");
  quantize->add_option("--pr-sp2", qa.pr_sp2, "Fraction of rows assigned to SP2");
  quantize->add_option("--alpha", qa.alpha, "Layer scale (default: grid search)");
  quantize->add_option("--fixed-bits", qa.fixed_bits, "Fixed-point width m");
  quantize->add_option("--m1", qa.m1, "SP2 q1 width");
  quantize->add_option("--m2", qa.m2, "SP2 q2 width");
  quantize->add_option("--act-bits", qa.act_bits, "Activation width recorded in the layer");
  quantize->add_option("--values", qa.values, "Also write the quantized real values (matrix file)");

  PartitionArgs pa;
  auto* partition = app.add_subcommand("partition", "Assign rows to SP2 / fixed-point by variance");
  partition->add_option("--input,input", pa.input, "Weight matrix file")->required();
  partition->add_option("--name", pa.name, "Layer name");
  partition->add_option("--pr-sp2", pa.pr_sp2, "Fraction of rows assigned to SP2");

  auto* train_cmd = app.add_subcommand("train", "ADMM + STE quantization-aware training of a toy MLP");

  EmulateArgs ea;
  auto* emulate = app.add_subcommand("emulate", "Bit-exact heterogeneous GEMM emulation");
  emulate->add_option("--layer", ea.layer, "Quantized layer JSON")->required();
  emulate->add_option("--acts", ea.acts, "Activation matrix file (batch x cols)")->required();
  emulate->add_option("--stats", ea.stats, "Stats JSON path (default <out>.stats.json)");
  emulate->add_option("--act-bits", ea.act_bits, "Activation width n");
  emulate->add_option("--act-clip", ea.act_clip, "Activation clip value (default max activation)");
  emulate->add_option("--bat", ea.bat, "Bat");
  emulate->add_option("--blk-in", ea.blk_in, "Blk_in");
  emulate->add_option("--blk-out-fixed", ea.blk_out_fixed, "Blk_out of the fixed-point core");
  emulate->add_option("--blk-out-sp2", ea.blk_out_sp2, "Blk_out of the SP2 core");
  emulate->add_option("--freq-mhz", ea.freq_mhz, "Clock frequency");

  CharacterizeArgs ca;
  auto* characterize = app.add_subcommand("characterize", "Select the SP2/fixed ratio for a device");
  characterize->add_option("--device,device", ca.device, "Device name")->required();
  characterize->add_option("--devices", ca.devices, "Device database JSON");
  characterize->add_option("--lut-cap", ca.lut_cap, "LUT utilization cap (fraction)");
  characterize->add_option("--overhead", ca.overhead, "Load/Store LUT overhead");
  characterize->add_option("--step", ca.step, "Blk_out_sp2 search step")->check(CLI::PositiveNumber);

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Merge training metrics and emulation stats");
  report->add_option("--metrics", ra.metrics, "metrics.csv from train");
  report->add_option("--stats", ra.stats, "Stats JSON files from emulate");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kConfig);
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (quantize->parsed()) return cmd_quantize(g, qa, out);
    if (partition->parsed()) return cmd_partition(g, pa, out);
    if (train_cmd->parsed()) return cmd_train(g, out);
    if (emulate->parsed()) return cmd_emulate(g, ea, out);
    if (characterize->parsed()) return cmd_characterize(g, ca, out);
    if (report->parsed()) return cmd_report(g, ra, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kInput);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kInput);
  }
  return static_cast<int>(ErrorKind::kConfig);
}

}  // namespace msq::cli
