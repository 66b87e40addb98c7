#include "msq/serialize.hpp"

#include <charconv>
#include <cmath>

#include "msq/error.hpp"

namespace msq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

}  // namespace

Json to_json(const QuantScheme& s) {
  return std::visit(overloaded{
                        [](const FixedPoint& f) { return Json{{"type", "fixed"}, {"bits", f.bits}}; },
                        [](const PowerOfTwo& p) { return Json{{"type", "p2"}, {"bits", p.bits}}; },
                        [](const Sp2& q) { return Json{{"type", "sp2"}, {"m1", q.m1}, {"m2", q.m2}}; },
                    },
                    s);
}

QuantScheme scheme_from_json(const Json& j) {
  return guarded("scheme", [&]() -> QuantScheme {
    const auto type = j.at("type").get<std::string>();
    QuantScheme s;
    if (type == "fixed") {
      s = FixedPoint{j.at("bits").get<int>()};
    } else if (type == "p2") {
      s = PowerOfTwo{j.at("bits").get<int>()};
    } else if (type == "sp2") {
      s = Sp2{j.at("m1").get<int>(), j.at("m2").get<int>()};
    } else {
      throw InputError("scheme: unknown type '" + type + "'");
    }
    validate(s);
    return s;
  });
}

Json to_json(const MixedScheme& s) {
  return Json{{"fixed", to_json(QuantScheme{s.fixed})}, {"sp2", to_json(QuantScheme{s.sp2})}};
}

MixedScheme mixed_scheme_from_json(const Json& j) {
  return guarded("schemes", [&] {
    MixedScheme m;
    const auto f = scheme_from_json(j.at("fixed"));
    const auto s = scheme_from_json(j.at("sp2"));
    if (!std::holds_alternative<FixedPoint>(f) || !std::holds_alternative<Sp2>(s))
      throw InputError("schemes: expected a fixed and an sp2 scheme");
    m.fixed = std::get<FixedPoint>(f);
    m.sp2 = std::get<Sp2>(s);
    return m;
  });
}

Json to_json(const LevelSet& ls) {
  Json codes = Json::array();
  for (const auto& cw : ls.codes) codes.push_back(pack(cw, ls.scheme));
  return Json{{"scheme", to_json(ls.scheme)}, {"alpha", ls.alpha}, {"levels", ls.levels}, {"codes", codes}};
}

Json to_json(const RowPartition& p, const std::string& layer) {
  Json a = Json::array();
  for (auto s : p.assignments) a.push_back(std::string(to_string(s)));
  return Json{{"layer", layer}, {"theta", p.theta}, {"pr_sp2", p.pr_sp2}, {"assignments", a}};
}

RowPartition partition_from_json(const Json& j) {
  return guarded("partition", [&] {
    RowPartition p;
    p.theta = j.at("theta").get<double>();
    p.pr_sp2 = j.at("pr_sp2").get<double>();
    for (const auto& a : j.at("assignments")) p.assignments.push_back(row_scheme_from_string(a.get<std::string>()));
    return p;
  });
}

Json to_json(const QuantizedLayer& layer) {
  Json codes = Json::array();
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const QuantScheme s = layer.row_scheme(r);
    Json row = Json::array();
    for (std::size_t c = 0; c < layer.cols; ++c) row.push_back(pack(layer.code(r, c), s));
    codes.push_back(std::move(row));
  }
  return Json{{"name", layer.name},
              {"rows", layer.rows},
              {"cols", layer.cols},
              {"alpha", layer.alpha},
              {"act_bits", layer.act_bits},
              {"schemes", to_json(layer.schemes)},
              {"partition", to_json(layer.partition, layer.name)},
              {"codes", codes}};
}

QuantizedLayer quantized_layer_from_json(const Json& j) {
  return guarded("quantized layer", [&] {
    QuantizedLayer l;
    l.name = j.value("name", std::string("layer"));
    l.rows = j.at("rows").get<std::size_t>();
    l.cols = j.at("cols").get<std::size_t>();
    l.alpha = j.at("alpha").get<double>();
    if (!(l.alpha > 0.0) || !std::isfinite(l.alpha)) throw InputError("quantized layer: alpha must be positive");
    l.act_bits = j.value("act_bits", 4);
    if (l.act_bits < 2 || l.act_bits > 16) throw InputError("quantized layer: act_bits out of range");
    l.schemes = mixed_scheme_from_json(j.at("schemes"));
    l.partition = partition_from_json(j.at("partition"));
    if (l.partition.rows() != l.rows) throw InputError("quantized layer: partition row count mismatch");
    const auto& codes = j.at("codes");
    if (codes.size() != l.rows) throw InputError("quantized layer: code row count mismatch");
    l.codes.reserve(l.rows * l.cols);
    for (std::size_t r = 0; r < l.rows; ++r) {
      if (codes[r].size() != l.cols) throw InputError("quantized layer: code column count mismatch");
      const QuantScheme s = l.row_scheme(r);
      for (const auto& c : codes[r]) l.codes.push_back(unpack(c.get<std::uint32_t>(), s));
    }
    return l;
  });
}

Json to_json(const GemmTile& t) {
  return Json{{"bat", t.bat}, {"blk_in", t.blk_in}, {"blk_out_fixed", t.blk_out_fixed}, {"blk_out_sp2", t.blk_out_sp2}};
}

Json to_json(const GemmStats& s) {
  return Json{{"macs_fixed", s.macs_fixed},   {"macs_sp2", s.macs_sp2},         {"idle_slots", s.idle_slots},
              {"cycles_ideal", s.cycles_ideal}, {"cycles_fixed", s.cycles_fixed}, {"cycles_sp2", s.cycles_sp2},
              {"idle_fixed", s.idle_fixed},   {"idle_sp2", s.idle_sp2}};
}

void apply_json(TrainConfig& cfg, const Json& j) {
  try {
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("pr_sp2")) cfg.pr_sp2 = j.at("pr_sp2").get<double>();
    if (j.contains("fixed_bits")) cfg.schemes.fixed.bits = j.at("fixed_bits").get<int>();
    if (j.contains("sp2_m1")) cfg.schemes.sp2.m1 = j.at("sp2_m1").get<int>();
    if (j.contains("sp2_m2")) cfg.schemes.sp2.m2 = j.at("sp2_m2").get<int>();
    if (j.contains("act_bits")) cfg.act_bits = j.at("act_bits").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("quantize")) cfg.quantize = j.at("quantize").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

Json to_json(const TrainConfig& cfg) {
  return Json{{"epochs", cfg.epochs},         {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate}, {"pr_sp2", cfg.pr_sp2},
              {"fixed_bits", cfg.schemes.fixed.bits}, {"sp2_m1", cfg.schemes.sp2.m1},
              {"sp2_m2", cfg.schemes.sp2.m2}, {"act_bits", cfg.act_bits},
              {"seed", cfg.seed},             {"quantize", cfg.quantize}};
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace msq
