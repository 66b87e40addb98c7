#pragma once

#include <cstdint>
#include <vector>

#include "msq/quantizers.hpp"
#include "msq/tensor.hpp"

namespace msq {

/// Tile sizes of the two GEMM cores. Both cores see the same Bat x Blk_in
/// activation block; each produces its own Blk_out output channels.
struct GemmTile {
  std::size_t bat = 1;
  std::size_t blk_in = 16;
  std::size_t blk_out_fixed = 16;
  std::size_t blk_out_sp2 = 0;

  friend bool operator==(const GemmTile&, const GemmTile&) = default;
};

void validate(const GemmTile& tile);

/// Global output-row indices produced by each core, ascending.
struct FilterIndexMap {
  std::vector<std::size_t> fixed_rows;
  std::vector<std::size_t> sp2_rows;
};

struct GemmStats {
  std::uint64_t macs_fixed = 0;
  std::uint64_t macs_sp2 = 0;
  std::uint64_t cycles_fixed = 0;
  std::uint64_t cycles_sp2 = 0;
  /// Cores run in lock step, so a layer takes max(cycles_fixed, cycles_sp2).
  std::uint64_t cycles_ideal = 0;
  /// PE slots left unused over cycles_ideal: ragged tiles plus the tail where
  /// one core has finished and the other has not.
  std::uint64_t idle_slots = 0;
  std::uint64_t idle_fixed = 0;
  std::uint64_t idle_sp2 = 0;

  std::uint64_t total_macs() const noexcept { return macs_fixed + macs_sp2; }
};

struct GemmResult {
  /// batch x rows. Entry (b, r) is an integer numerator: the real output is
  /// value * alpha * act_scale / denominator(r), see output_denominator().
  IntMatrix out;
  FilterIndexMap index;
  GemmStats stats;
};

/// sign * ((a << (d - e1)) + (a << (d - e2))), d = 2^m1 - 1; zero terms drop out.
/// Equals a * level / alpha * 2^d exactly.
std::int64_t sp2_mac(std::int64_t a_code, const CodeWord& cw, const Sp2& scheme);

/// sign * a * magnitude, computed as a shift-add over the magnitude bits.
std::int64_t fixed_mac(std::int64_t a_code, const CodeWord& cw, const FixedPoint& scheme);

/// Implicit denominator of row r's integer outputs: 2^d for SP2 rows,
/// 2^(m-1) - 1 for fixed-point rows.
std::int64_t output_denominator(const QuantizedLayer& layer, std::size_t r);

FilterIndexMap build_filter_index(const RowPartition& partition);

/// Batch x cols activation codes against a rows x cols quantized layer.
GemmResult hetero_gemm(const IntMatrix& acts, const QuantizedLayer& layer, const GemmTile& tile);

Matrix2D dequantize_output(const IntMatrix& out, const QuantizedLayer& layer, double act_scale);

/// Tile-level counts without running the arithmetic; hetero_gemm reports the same numbers.
GemmStats tile_stats(std::size_t batch, std::size_t cols, std::size_t rows_fixed,
                     std::size_t rows_sp2, const GemmTile& tile);

}  // namespace msq
