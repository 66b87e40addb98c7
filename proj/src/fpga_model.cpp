#include "msq/fpga_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "msq/error.hpp"
#include "msq/tensor_io.hpp"

namespace msq {

void validate(const Device& d) {
  if (d.lut <= 0 || d.dsp <= 0 || d.bram36 <= 0 || d.ff <= 0)
    throw ConfigError("device " + d.name + ": resource counts must be positive");
  if (!(d.freq_mhz > 0)) throw ConfigError("device " + d.name + ": frequency must be positive");
}

double peak_throughput(const DesignPoint& dp) {
  if (dp.blk_out_fixed < 1) throw ConfigError("design point: Blk_out_fixed must be >= 1");
  const double macs_per_cycle =
      static_cast<double>(dp.bat * dp.blk_in * (dp.blk_out_fixed + dp.blk_out_sp2));
  return 2.0 * macs_per_cycle * dp.freq_mhz / 1000.0;
}

Calibration calibrate_lut_model(const std::vector<CalibrationPoint>& points) {
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.design.sp2_lanes());
  if (points.size() < 2 || distinct.size() < 2) {
    throw ConfigError("calibrate_lut_model: need at least two points with distinct SP2 lane counts");
  }

  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, dsp_ratio = 0;
  for (const auto& p : points) {
    const double x = p.design.sp2_lanes();
    n += 1;
    sx += x;
    sy += p.lut;
    sxx += x * x;
    sxy += x * p.lut;
    if (p.design.fixed_lanes() > 0) dsp_ratio += p.dsp / p.design.fixed_lanes();
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw ConfigError("calibrate_lut_model: rank-deficient input");

  Calibration cal;
  cal.model.lut_per_sp2_lane = (n * sxy - sx * sy) / den;
  cal.model.base_lut = (sy - cal.model.lut_per_sp2_lane * sx) / n;
  cal.model.dsp_per_fixed_lane = dsp_ratio / n;
  if (cal.model.lut_per_sp2_lane < 0 || cal.model.base_lut < 0)
    throw ConfigError("calibrate_lut_model: fit produced a negative coefficient");

  for (const auto& p : points) {
    const double r = std::abs(p.lut - cal.model.predict_lut(p.design));
    cal.max_residual = std::max(cal.max_residual, r);
    cal.max_relative_residual = std::max(cal.max_relative_residual, r / p.lut);
  }
  return cal;
}

RatioSelection select_ratio(const Device& device, const BaseDesign& base, const LutCostModel& cost,
                            double lut_cap, double overhead_lut, std::size_t step) {
  validate(device);
  if (!(lut_cap >= 0.0 && lut_cap <= 1.0)) throw ConfigError("select_ratio: lut_cap must be in [0, 1]");
  if (step == 0) throw ConfigError("select_ratio: step must be >= 1");
  if (!(cost.lut_per_sp2_lane > 0.0)) throw ConfigError("select_ratio: LUT cost per SP2 lane must be positive");
  if (base.bat < 1 || base.blk_in < 1 || base.blk_out_fixed < 1)
    throw ConfigError("select_ratio: base design sizes must be >= 1");

  const double budget = lut_cap * static_cast<double>(device.lut);
  auto evaluate = [&](std::size_t sp2) {
    RatioCandidate c;
    c.design = DesignPoint{device.name, base.bat, base.blk_in, base.blk_out_fixed, sp2, device.freq_mhz};
    c.predicted_lut = cost.predict_lut(c.design) + overhead_lut;
    c.predicted_dsp = cost.predict_dsp(c.design);
    c.lut_utilization = c.predicted_lut / static_cast<double>(device.lut);
    c.peak_gops = peak_throughput(c.design);
    c.feasible = c.predicted_lut <= budget;
    return c;
  };

  RatioSelection sel;
  RatioCandidate cur = evaluate(0);
  sel.candidates.push_back(cur);
  if (!cur.feasible) {
    throw ConfigError("select_ratio: base design needs " + std::to_string(cur.predicted_lut) +
                      " LUTs, cap allows " + std::to_string(budget));
  }
  RatioCandidate best = cur;
  for (std::size_t sp2 = step;; sp2 += step) {
    cur = evaluate(sp2);
    sel.candidates.push_back(cur);
    if (!cur.feasible) break;
    best = cur;
  }
  sel.design = best.design;
  sel.pr_sp2 = best.design.pr_sp2();
  sel.predicted_lut = best.predicted_lut;
  sel.predicted_dsp = best.predicted_dsp;
  return sel;
}

ThroughputEstimate estimate_layer_throughput(const DesignPoint& dp, const GemmStats& stats) {
  ThroughputEstimate e;
  e.useful_macs = stats.total_macs();
  e.idle_slots = stats.idle_slots;
  const auto slots = e.useful_macs + e.idle_slots;
  e.utilization = slots ? static_cast<double>(e.useful_macs) / static_cast<double>(slots) : 0.0;
  e.gops = peak_throughput(dp) * e.utilization;
  return e;
}

ThroughputEstimate estimate_network_throughput(const DesignPoint& dp, const std::vector<GemmStats>& layers) {
  GemmStats total;
  for (const auto& s : layers) {
    total.macs_fixed += s.macs_fixed;
    total.macs_sp2 += s.macs_sp2;
    total.idle_slots += s.idle_slots;
  }
  return estimate_layer_throughput(dp, total);
}

// ---------------------------------------------------------------------------

std::vector<DeviceProfile> parse_device_db(const std::string& json_text) {
  std::vector<DeviceProfile> db;
  try {
    const auto root = nlohmann::json::parse(json_text);
    for (const auto& j : root.at("devices")) {
      DeviceProfile p;
      p.device.name = j.at("name").get<std::string>();
      p.device.lut = j.at("lut").get<long>();
      p.device.dsp = j.at("dsp").get<long>();
      p.device.bram36 = j.at("bram36").get<double>();
      p.device.ff = j.at("ff").get<long>();
      p.device.freq_mhz = j.value("freq_mhz", 100.0);
      validate(p.device);
      p.lut_cap = j.value("lut_cap", 0.7);
      p.overhead_lut = j.value("loadstore_overhead_lut", 0.0);
      if (j.contains("base_design")) {
        const auto& b = j.at("base_design");
        p.base = BaseDesign{b.at("bat").get<std::size_t>(), b.at("blk_in").get<std::size_t>(),
                            b.at("blk_out_fixed").get<std::size_t>()};
      }
      for (const auto& c : j.value("calibration", nlohmann::json::array())) {
        CalibrationPoint cp;
        cp.design = DesignPoint{p.device.name, p.base.bat, p.base.blk_in, p.base.blk_out_fixed,
                                c.at("blk_out_sp2").get<std::size_t>(), p.device.freq_mhz};
        cp.lut = c.at("lut").get<double>();
        cp.dsp = c.at("dsp").get<double>();
        p.calibration.push_back(cp);
      }
      db.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("device database: ") + e.what());
  }
  return db;
}

std::vector<DeviceProfile> load_device_db(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return parse_device_db(text);
}

const DeviceProfile& find_device(const std::vector<DeviceProfile>& db, const std::string& name) {
  for (const auto& p : db)
    if (p.device.name == name) return p;
  throw ConfigError("unknown device '" + name + "'");
}

}  // namespace msq
