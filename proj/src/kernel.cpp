#include "msq/kernel.hpp"

#include <algorithm>
#include <cassert>
#include <string>

#include "msq/error.hpp"

namespace msq {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Largest |numerator| a single weight can contribute for a row scheme.
std::int64_t max_weight_numerator(const QuantizedLayer& layer, RowScheme s) {
  if (s == RowScheme::kSp2) return std::int64_t{1} << sp2_denominator_exponent(layer.schemes.sp2);
  return fixed_max_magnitude(layer.schemes.fixed);
}

template <typename Mac>
void run_core(const IntMatrix& acts, const QuantizedLayer& layer,
              const std::vector<std::size_t>& rows, std::size_t bat, std::size_t blk_in,
              std::size_t blk_out, Mac&& mac, IntMatrix& out) {
  const std::size_t batch = acts.rows;
  const std::size_t cols = acts.cols;
  IntMatrix local(batch, rows.size());
  for (std::size_t b0 = 0; b0 < batch; b0 += bat) {
    const std::size_t b1 = std::min(batch, b0 + bat);
    for (std::size_t o0 = 0; o0 < rows.size(); o0 += blk_out) {
      const std::size_t o1 = std::min(rows.size(), o0 + blk_out);
      for (std::size_t i0 = 0; i0 < cols; i0 += blk_in) {
        const std::size_t i1 = std::min(cols, i0 + blk_in);
        for (std::size_t b = b0; b < b1; ++b) {
          for (std::size_t o = o0; o < o1; ++o) {
            std::int64_t acc = local(b, o);
            for (std::size_t i = i0; i < i1; ++i) acc += mac(acts(b, i), layer.code(rows[o], i));
            local(b, o) = acc;
          }
        }
      }
    }
  }
  // Store: scatter to global addresses through the filter index.
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < rows.size(); ++o) out(b, rows[o]) = local(b, o);
}

}  // namespace

void validate(const GemmTile& tile) {
  if (tile.bat < 1 || tile.blk_in < 1) throw ConfigError("GemmTile: Bat and Blk_in must be >= 1");
  if (tile.blk_out_fixed + tile.blk_out_sp2 == 0)
    throw ConfigError("GemmTile: at least one core needs Blk_out >= 1");
}

std::int64_t sp2_mac(std::int64_t a_code, const CodeWord& cw, const Sp2& scheme) {
  const int d = sp2_denominator_exponent(scheme);
  std::int64_t sum = 0;
  if (cw.e1) sum += a_code << (d - *cw.e1);
  if (cw.e2) sum += a_code << (d - *cw.e2);
  return cw.sign < 0 ? -sum : sum;
}

std::int64_t fixed_mac(std::int64_t a_code, const CodeWord& cw, const FixedPoint& scheme) {
  assert(cw.magnitude <= static_cast<std::uint32_t>(fixed_max_magnitude(scheme)));
  (void)scheme;
  std::int64_t sum = 0;
  for (std::uint32_t m = cw.magnitude, bit = 0; m != 0; m >>= 1, ++bit) {
    if (m & 1u) sum += a_code << bit;
  }
  assert(sum == a_code * static_cast<std::int64_t>(cw.magnitude));
  return cw.sign < 0 ? -sum : sum;
}

std::int64_t output_denominator(const QuantizedLayer& layer, std::size_t r) {
  if (layer.partition.assignments.at(r) == RowScheme::kSp2)
    return std::int64_t{1} << sp2_denominator_exponent(layer.schemes.sp2);
  return fixed_max_magnitude(layer.schemes.fixed);
}

FilterIndexMap build_filter_index(const RowPartition& partition) {
  FilterIndexMap map;
  for (std::size_t r = 0; r < partition.rows(); ++r) {
    (partition.assignments[r] == RowScheme::kSp2 ? map.sp2_rows : map.fixed_rows).push_back(r);
  }
  return map;
}

GemmStats tile_stats(std::size_t batch, std::size_t cols, std::size_t rows_fixed,
                     std::size_t rows_sp2, const GemmTile& tile) {
  validate(tile);
  if (rows_fixed > 0 && tile.blk_out_fixed == 0)
    throw ConfigError("fixed-point rows present but Blk_out_fixed is 0");
  if (rows_sp2 > 0 && tile.blk_out_sp2 == 0)
    throw ConfigError("SP2 rows present but Blk_out_sp2 is 0");

  GemmStats s;
  s.macs_fixed = static_cast<std::uint64_t>(batch) * cols * rows_fixed;
  s.macs_sp2 = static_cast<std::uint64_t>(batch) * cols * rows_sp2;
  const std::uint64_t outer = ceil_div(batch, tile.bat) * ceil_div(cols, tile.blk_in);
  s.cycles_fixed = rows_fixed ? outer * ceil_div(rows_fixed, tile.blk_out_fixed) : 0;
  s.cycles_sp2 = rows_sp2 ? outer * ceil_div(rows_sp2, tile.blk_out_sp2) : 0;
  s.cycles_ideal = std::max(s.cycles_fixed, s.cycles_sp2);
  const std::uint64_t lane = static_cast<std::uint64_t>(tile.bat) * tile.blk_in;
  s.idle_fixed = s.cycles_ideal * lane * tile.blk_out_fixed - s.macs_fixed;
  s.idle_sp2 = s.cycles_ideal * lane * tile.blk_out_sp2 - s.macs_sp2;
  s.idle_slots = s.idle_fixed + s.idle_sp2;
  return s;
}

GemmResult hetero_gemm(const IntMatrix& acts, const QuantizedLayer& layer, const GemmTile& tile) {
  if (acts.cols != layer.cols) {
    throw ShapeError("hetero_gemm: activations have " + std::to_string(acts.cols) +
                     " columns, layer expects " + std::to_string(layer.cols));
  }
  if (layer.partition.rows() != layer.rows || layer.codes.size() != layer.rows * layer.cols) {
    throw ShapeError("hetero_gemm: partition/code shape disagrees with layer");
  }
  validate(layer.schemes.fixed);
  validate(layer.schemes.sp2);

  const std::int64_t max_code = (std::int64_t{1} << layer.act_bits) - 1;
  for (std::int64_t a : acts.data) {
    if (a < 0 || a > max_code) {
      throw InputError("hetero_gemm: activation code " + std::to_string(a) + " outside [0, " +
                       std::to_string(max_code) + "]");
    }
  }
  // 64-bit accumulators: bound the worst-case sum before running.
  const auto bound = static_cast<__int128>(max_code) *
                     std::max(max_weight_numerator(layer, RowScheme::kSp2),
                              max_weight_numerator(layer, RowScheme::kFixed)) *
                     static_cast<__int128>(std::max<std::size_t>(layer.cols, 1));
  if (bound >= (static_cast<__int128>(1) << 62)) {
    throw NumericError("hetero_gemm: accumulator could overflow 64 bits for this layer");
  }

  GemmResult res;
  res.index = build_filter_index(layer.partition);
  res.stats = tile_stats(acts.rows, acts.cols, res.index.fixed_rows.size(),
                         res.index.sp2_rows.size(), tile);
  res.out = IntMatrix(acts.rows, layer.rows);

  for (const std::size_t r : res.index.fixed_rows) {
    for (std::size_t c = 0; c < layer.cols; ++c) {
      const auto& cw = layer.code(r, c);
      if (cw.e1 || cw.e2 || cw.magnitude > static_cast<std::uint32_t>(fixed_max_magnitude(layer.schemes.fixed)))
        throw InputError("hetero_gemm: row " + std::to_string(r) + " holds a non fixed-point code word");
    }
  }
  for (const std::size_t r : res.index.sp2_rows) {
    for (std::size_t c = 0; c < layer.cols; ++c) {
      const auto& cw = layer.code(r, c);
      const int lim1 = (1 << layer.schemes.sp2.m1) - 1;
      const int lim2 = (1 << layer.schemes.sp2.m2) - 1;
      if (cw.magnitude != 0 || (cw.e1 && (*cw.e1 < 1 || *cw.e1 > lim1)) ||
          (cw.e2 && (*cw.e2 < 1 || *cw.e2 > lim2)))
        throw InputError("hetero_gemm: row " + std::to_string(r) + " holds a non SP2 code word");
    }
  }

  const FixedPoint fixed = layer.schemes.fixed;
  const Sp2 sp2 = layer.schemes.sp2;
  run_core(acts, layer, res.index.fixed_rows, tile.bat, tile.blk_in, std::max<std::size_t>(tile.blk_out_fixed, 1),
           [&](std::int64_t a, const CodeWord& cw) { return fixed_mac(a, cw, fixed); }, res.out);
  run_core(acts, layer, res.index.sp2_rows, tile.bat, tile.blk_in, std::max<std::size_t>(tile.blk_out_sp2, 1),
           [&](std::int64_t a, const CodeWord& cw) { return sp2_mac(a, cw, sp2); }, res.out);
  return res;
}

Matrix2D dequantize_output(const IntMatrix& out, const QuantizedLayer& layer, double act_scale) {
  if (out.cols != layer.rows) throw ShapeError("dequantize_output: column count != layer rows");
  std::vector<double> row_scale(layer.rows);
  for (std::size_t r = 0; r < layer.rows; ++r)
    row_scale[r] = layer.alpha * act_scale / static_cast<double>(output_denominator(layer, r));
  Matrix2D res(out.rows, out.cols);
  for (std::size_t b = 0; b < out.rows; ++b)
    for (std::size_t r = 0; r < out.cols; ++r) res(b, r) = static_cast<double>(out(b, r)) * row_scale[r];
  return res;
}

}  // namespace msq
