#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "msq/partition.hpp"
#include "msq/tensor.hpp"

namespace msq {

// ---------------------------------------------------------------------------
// Schemes
// ---------------------------------------------------------------------------

/// Uniform levels +/-alpha * k / (2^(m-1) - 1), k = 0 .. 2^(m-1) - 1.
struct FixedPoint {
  int bits = 4;
  friend bool operator==(const FixedPoint&, const FixedPoint&) = default;
};

/// Levels +/-alpha * {0, 2^-(2^(m-1)-2), ..., 1/2, 1}.
struct PowerOfTwo {
  int bits = 4;
  friend bool operator==(const PowerOfTwo&, const PowerOfTwo&) = default;
};

/// Levels +/-alpha * (q1 + q2) with q1 in {0, 2^-(2^m1-1), ..., 1/2} and
/// q2 in {0, 2^-(2^m2-1), ..., 1/2}. Total width m1 + m2 + 1 (sign bit).
struct Sp2 {
  int m1 = 2;
  int m2 = 1;
  int bits() const noexcept { return m1 + m2 + 1; }
  friend bool operator==(const Sp2&, const Sp2&) = default;
};

using QuantScheme = std::variant<FixedPoint, PowerOfTwo, Sp2>;

/// Throws SchemeError when bit-widths violate the scheme constraints.
void validate(const QuantScheme& scheme);
int total_bits(const QuantScheme& scheme) noexcept;
std::string to_string(const QuantScheme& scheme);

/// Largest magnitude code of a fixed-point scheme: 2^(m-1) - 1.
std::int64_t fixed_max_magnitude(const FixedPoint& s) noexcept;
/// Common denominator exponent d of an SP2 scheme: every level is an
/// integer multiple of alpha / 2^d, with d = 2^m1 - 1.
int sp2_denominator_exponent(const Sp2& s) noexcept;

// ---------------------------------------------------------------------------
// Code words
// ---------------------------------------------------------------------------

/// Sign plus scheme payload. Exactly one payload is meaningful per scheme:
///   FixedPoint : `magnitude` in [0, 2^(m-1) - 1]
///   PowerOfTwo : `e1` = exponent e (level 2^-e), nullopt = zero
///   SP2        : `e1` = q1 exponent, `e2` = q2 exponent, nullopt = zero term
/// The zero word always has sign +1.
struct CodeWord {
  int sign = 1;
  std::uint32_t magnitude = 0;
  std::optional<int> e1;
  std::optional<int> e2;

  friend bool operator==(const CodeWord&, const CodeWord&) = default;
};

/// Packs into an m-bit integer: sign in bit m-1, payload below it.
/// SP2 payload is (q1 field << m2) | q2 field, each field 0 for zero or the
/// exponent itself. PowerOfTwo field is 0 for zero or exponent + 1.
std::uint32_t pack(const CodeWord& cw, const QuantScheme& scheme);
CodeWord unpack(std::uint32_t bits, const QuantScheme& scheme);

// ---------------------------------------------------------------------------
// Level sets
// ---------------------------------------------------------------------------

struct LevelSet {
  QuantScheme scheme;
  double alpha = 1.0;
  std::vector<double> levels;  // ascending, distinct, symmetric, contains 0
  std::vector<CodeWord> codes;  // canonical code word for each level
};

LevelSet build_levels(const QuantScheme& scheme, double alpha);

/// Nearest level to clip(w, -alpha, +alpha); ties go to the smaller magnitude.
double project(double w, const LevelSet& ls);

/// Fixed-point quantizer written through a level transform
/// h(x) = tanh(x)/2 + 0.5: alpha * h^-1(round((2^m - 1) h(c)) / (2^m - 1)),
/// c the clipped normalized weight. Kept for comparison with the
/// nearest-level projector; its outputs are generally not members of the
/// fixed-point level set.
double project_tanh_transform(double w, const FixedPoint& scheme, double alpha);

/// Throws InputError when `level` is not exactly a member of `ls`.
CodeWord encode(double level, const LevelSet& ls);
double decode(const CodeWord& cw, const LevelSet& ls);

// ---------------------------------------------------------------------------
// Mixed-scheme layers
// ---------------------------------------------------------------------------

/// The two schemes an MSQ layer mixes. Both share the layer's alpha.
struct MixedScheme {
  FixedPoint fixed{4};
  Sp2 sp2{2, 1};
  friend bool operator==(const MixedScheme&, const MixedScheme&) = default;
};

struct QuantizedLayer {
  std::string name = "layer";
  std::size_t rows = 0;
  std::size_t cols = 0;
  double alpha = 1.0;
  MixedScheme schemes;
  RowPartition partition;
  int act_bits = 4;
  std::vector<CodeWord> codes;  // row-major, rows x cols

  const CodeWord& code(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }
  QuantScheme row_scheme(std::size_t r) const;
};

struct ProjectedLayer {
  Matrix2D values;
  QuantizedLayer layer;
};

ProjectedLayer project_matrix(const Matrix2D& w, const RowPartition& partition,
                              const MixedScheme& schemes, double alpha);

/// Reconstructs real weights from the code words of a layer.
Matrix2D dequantize_weights(const QuantizedLayer& layer);

/// Alpha minimizing mean squared projection error over the 64-point grid
/// max|w| * (0.3 + 0.7 i / 63), i = 0..63. Ties keep the smaller alpha.
/// All-zero input yields 1.0.
double choose_alpha(const Matrix2D& w, const QuantScheme& scheme);
/// Same grid, with each row scored under its partition-assigned scheme.
double choose_alpha(const Matrix2D& w, const RowPartition& partition, const MixedScheme& schemes);

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Unsigned n-bit activation quantizer with clip value alpha_a.
struct ActQuant {
  int bits = 4;
  double clip = 1.0;

  std::int64_t max_code() const noexcept { return (std::int64_t{1} << bits) - 1; }
  double scale() const noexcept { return clip / static_cast<double>(max_code()); }
};

struct ActCodes {
  IntMatrix codes;
  double scale = 1.0;  // real value = code * scale
  int bits = 4;
};

void validate(const ActQuant& aq);
/// clip to [0, alpha_a], scale to [0, 2^n - 1], round half away from zero.
std::int64_t quantize_activation(double a, const ActQuant& aq);
ActCodes quantize_activations(const Matrix2D& a, const ActQuant& aq);
Matrix2D dequantize_activations(const ActCodes& codes);

}  // namespace msq
