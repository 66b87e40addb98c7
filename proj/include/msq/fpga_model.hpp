#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msq/kernel.hpp"

namespace msq {

struct Device {
  std::string name;
  long lut = 0;
  long dsp = 0;
  double bram36 = 0;
  long ff = 0;
  double freq_mhz = 100.0;
};

void validate(const Device& d);

struct DesignPoint {
  std::string device;
  std::size_t bat = 1;
  std::size_t blk_in = 16;
  std::size_t blk_out_fixed = 16;
  std::size_t blk_out_sp2 = 0;
  double freq_mhz = 100.0;

  GemmTile tile() const { return {bat, blk_in, blk_out_fixed, blk_out_sp2}; }
  /// Parallel MAC lanes of each core.
  double fixed_lanes() const { return static_cast<double>(bat * blk_in * blk_out_fixed); }
  double sp2_lanes() const { return static_cast<double>(bat * blk_in * blk_out_sp2); }
  double pr_sp2() const {
    return static_cast<double>(blk_out_sp2) / static_cast<double>(blk_out_fixed + blk_out_sp2);
  }
};

/// LUT ~= base_lut + lut_per_sp2_lane * Bat*Blk_in*Blk_out_sp2,
/// DSP ~= dsp_per_fixed_lane * Bat*Blk_in*Blk_out_fixed.
struct LutCostModel {
  double base_lut = 0.0;
  double lut_per_sp2_lane = 0.0;
  double dsp_per_fixed_lane = 0.0;

  double predict_lut(const DesignPoint& dp) const { return base_lut + lut_per_sp2_lane * dp.sp2_lanes(); }
  double predict_dsp(const DesignPoint& dp) const { return dsp_per_fixed_lane * dp.fixed_lanes(); }
};

struct CalibrationPoint {
  DesignPoint design;
  double lut = 0.0;
  double dsp = 0.0;
};

struct Calibration {
  LutCostModel model;
  double max_residual = 0.0;           // LUTs
  double max_relative_residual = 0.0;  // residual / measured LUT
};

/// 2 ops per MAC: 2 * Bat * Blk_in * (Blk_out_fixed + Blk_out_sp2) * f[GHz].
double peak_throughput(const DesignPoint& dp);

/// Ordinary least squares over x = Bat*Blk_in*Blk_out_sp2. The normal
/// equations are formed from integer-valued sums, so collinear integer data
/// fits with an exactly zero residual. Throws ConfigError for fewer than two
/// distinct x values.
Calibration calibrate_lut_model(const std::vector<CalibrationPoint>& points);

struct BaseDesign {
  std::size_t bat = 1;
  std::size_t blk_in = 16;
  std::size_t blk_out_fixed = 16;
};

struct RatioCandidate {
  DesignPoint design;
  double predicted_lut = 0.0;
  double predicted_dsp = 0.0;
  double lut_utilization = 0.0;
  double peak_gops = 0.0;
  bool feasible = false;
};

struct RatioSelection {
  DesignPoint design;
  double pr_sp2 = 0.0;
  double predicted_lut = 0.0;
  double predicted_dsp = 0.0;
  /// Every step tried, up to and including the first infeasible one.
  std::vector<RatioCandidate> candidates;
};

/// Grows Blk_out_sp2 in steps of `step` while base_lut + c*lanes + overhead
/// stays within lut_cap * device.lut. Throws ConfigError when even
/// Blk_out_sp2 = 0 exceeds the cap.
RatioSelection select_ratio(const Device& device, const BaseDesign& base, const LutCostModel& cost,
                            double lut_cap, double overhead_lut = 0.0, std::size_t step = 8);

struct ThroughputEstimate {
  double utilization = 0.0;
  double gops = 0.0;
  std::uint64_t useful_macs = 0;
  std::uint64_t idle_slots = 0;
};

/// utilization = useful MACs / (useful MACs + idle slots); GOPS = peak * utilization.
ThroughputEstimate estimate_layer_throughput(const DesignPoint& dp, const GemmStats& stats);
/// Aggregate over layers (slot-weighted).
ThroughputEstimate estimate_network_throughput(const DesignPoint& dp, const std::vector<GemmStats>& layers);

// ---------------------------------------------------------------------------
// Device database
// ---------------------------------------------------------------------------

struct DeviceProfile {
  Device device;
  BaseDesign base;
  double lut_cap = 0.7;
  double overhead_lut = 0.0;
  std::vector<CalibrationPoint> calibration;
};

std::vector<DeviceProfile> load_device_db(const std::filesystem::path& path);
std::vector<DeviceProfile> parse_device_db(const std::string& json_text);
/// Throws ConfigError when the device is missing.
const DeviceProfile& find_device(const std::vector<DeviceProfile>& db, const std::string& name);

}  // namespace msq
