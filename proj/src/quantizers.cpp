#include "msq/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "msq/error.hpp"

namespace msq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double pow2_neg(int e) { return std::ldexp(1.0, -e); }

// Unit magnitude (alpha = 1) of a non-negative code word. Both level
// construction and decoding go through this, which is what makes the
// encode/decode round trip exact for every scheme.
double unit_magnitude(const CodeWord& cw, const QuantScheme& scheme) {
  return std::visit(
      overloaded{
          [&](const FixedPoint& s) {
            return static_cast<double>(cw.magnitude) / static_cast<double>(fixed_max_magnitude(s));
          },
          [&](const PowerOfTwo&) { return cw.e1 ? pow2_neg(*cw.e1) : 0.0; },
          [&](const Sp2&) {
            return (cw.e1 ? pow2_neg(*cw.e1) : 0.0) + (cw.e2 ? pow2_neg(*cw.e2) : 0.0);
          },
      },
      scheme);
}

// Non-negative canonical code words of a scheme, in enumeration order.
// For SP2 larger q1 terms are enumerated first, so the first code seen for a
// duplicate magnitude (1/2 = 1/2 + 0 = 0 + 1/2) is the canonical one.
std::vector<CodeWord> enumerate_codes(const QuantScheme& scheme) {
  std::vector<CodeWord> out;
  std::visit(overloaded{
                 [&](const FixedPoint& s) {
                   for (std::int64_t k = 0; k <= fixed_max_magnitude(s); ++k) {
                     CodeWord cw;
                     cw.magnitude = static_cast<std::uint32_t>(k);
                     out.push_back(cw);
                   }
                 },
                 [&](const PowerOfTwo& s) {
                   out.push_back(CodeWord{});
                   const int emax = (1 << (s.bits - 1)) - 2;
                   for (int e = 0; e <= emax; ++e) {
                     CodeWord cw;
                     cw.e1 = e;
                     out.push_back(cw);
                   }
                 },
                 [&](const Sp2& s) {
                   auto terms = [](int bits) {
                     std::vector<std::optional<int>> t;
                     for (int e = 1; e <= (1 << bits) - 1; ++e) t.emplace_back(e);
                     t.emplace_back(std::nullopt);
                     return t;
                   };
                   for (const auto& e1 : terms(s.m1)) {
                     for (const auto& e2 : terms(s.m2)) {
                       CodeWord cw;
                       cw.e1 = e1;
                       cw.e2 = e2;
                       out.push_back(cw);
                     }
                   }
                 },
             },
             scheme);
  return out;
}

std::size_t nearest_index(double w, const LevelSet& ls) {
  if (std::isnan(w)) throw NumericError("project: NaN weight");
  const auto& lv = ls.levels;
  const double c = std::clamp(w, lv.front(), lv.back());
  const auto it = std::lower_bound(lv.begin(), lv.end(), c);
  const auto hi = static_cast<std::size_t>(it - lv.begin());
  if (lv[hi] == c || hi == 0) return hi;
  const std::size_t lo = hi - 1;
  const double dlo = c - lv[lo];
  const double dhi = lv[hi] - c;
  if (dlo < dhi) return lo;
  if (dhi < dlo) return hi;
  return std::abs(lv[lo]) <= std::abs(lv[hi]) ? lo : hi;
}

double checked_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw SchemeError("alpha must be positive and finite, got " + std::to_string(alpha));
  }
  return alpha;
}

}  // namespace

// ---------------------------------------------------------------------------

void validate(const QuantScheme& scheme) {
  std::visit(overloaded{
                 [](const FixedPoint& s) {
                   if (s.bits < 2 || s.bits > 16)
                     throw SchemeError("FixedPoint bits must be in [2, 16], got " + std::to_string(s.bits));
                 },
                 [](const PowerOfTwo& s) {
                   if (s.bits < 2 || s.bits > 10)
                     throw SchemeError("PowerOfTwo bits must be in [2, 10], got " + std::to_string(s.bits));
                 },
                 [](const Sp2& s) {
                   // m1 <= 5 keeps 2^-1 + 2^-(2^m1 - 1) exactly representable in a double.
                   if (s.m2 < 1 || s.m1 < s.m2 || s.m1 > 5) {
                     throw SchemeError("SP2 needs 5 >= m1 >= m2 >= 1, got m1=" + std::to_string(s.m1) +
                                       " m2=" + std::to_string(s.m2));
                   }
                 },
             },
             scheme);
}

int total_bits(const QuantScheme& scheme) noexcept {
  return std::visit(overloaded{
                        [](const FixedPoint& s) { return s.bits; },
                        [](const PowerOfTwo& s) { return s.bits; },
                        [](const Sp2& s) { return s.bits(); },
                    },
                    scheme);
}

std::string to_string(const QuantScheme& scheme) {
  return std::visit(overloaded{
                        [](const FixedPoint& s) { return "fixed" + std::to_string(s.bits); },
                        [](const PowerOfTwo& s) { return "p2_" + std::to_string(s.bits); },
                        [](const Sp2& s) {
                          return "sp2_" + std::to_string(s.m1) + "_" + std::to_string(s.m2);
                        },
                    },
                    scheme);
}

std::int64_t fixed_max_magnitude(const FixedPoint& s) noexcept {
  return (std::int64_t{1} << (s.bits - 1)) - 1;
}

int sp2_denominator_exponent(const Sp2& s) noexcept { return (1 << s.m1) - 1; }

// ---------------------------------------------------------------------------

std::uint32_t pack(const CodeWord& cw, const QuantScheme& scheme) {
  const int m = total_bits(scheme);
  std::uint32_t payload = std::visit(
      overloaded{
          [&](const FixedPoint& s) -> std::uint32_t {
            if (cw.magnitude > static_cast<std::uint32_t>(fixed_max_magnitude(s)))
              throw InputError("pack: fixed-point magnitude out of range");
            return cw.magnitude;
          },
          [&](const PowerOfTwo& s) -> std::uint32_t {
            if (!cw.e1) return 0;
            if (*cw.e1 < 0 || *cw.e1 > (1 << (s.bits - 1)) - 2)
              throw InputError("pack: power-of-2 exponent out of range");
            return static_cast<std::uint32_t>(*cw.e1 + 1);
          },
          [&](const Sp2& s) -> std::uint32_t {
            auto field = [](const std::optional<int>& e, int bits) -> std::uint32_t {
              if (!e) return 0;
              if (*e < 1 || *e > (1 << bits) - 1) throw InputError("pack: SP2 exponent out of range");
              return static_cast<std::uint32_t>(*e);
            };
            return (field(cw.e1, s.m1) << s.m2) | field(cw.e2, s.m2);
          },
      },
      scheme);
  const std::uint32_t sign_bit = cw.sign < 0 ? (1u << (m - 1)) : 0u;
  return sign_bit | payload;
}

CodeWord unpack(std::uint32_t bits, const QuantScheme& scheme) {
  const int m = total_bits(scheme);
  if (bits >> m) throw InputError("unpack: code " + std::to_string(bits) + " wider than " + std::to_string(m) + " bits");
  const std::uint32_t payload = bits & ((1u << (m - 1)) - 1);
  CodeWord cw;
  cw.sign = (bits >> (m - 1)) & 1u ? -1 : 1;
  std::visit(overloaded{
                 [&](const FixedPoint&) { cw.magnitude = payload; },
                 [&](const PowerOfTwo&) {
                   if (payload != 0) cw.e1 = static_cast<int>(payload) - 1;
                 },
                 [&](const Sp2& s) {
                   const std::uint32_t f1 = payload >> s.m2;
                   const std::uint32_t f2 = payload & ((1u << s.m2) - 1);
                   if (f1 != 0) cw.e1 = static_cast<int>(f1);
                   if (f2 != 0) cw.e2 = static_cast<int>(f2);
                 },
             },
             scheme);
  if (unit_magnitude(cw, scheme) == 0.0 && cw.sign < 0) {
    throw InputError("unpack: negative zero code word is not canonical");
  }
  return cw;
}

// ---------------------------------------------------------------------------

LevelSet build_levels(const QuantScheme& scheme, double alpha) {
  validate(scheme);
  checked_alpha(alpha);

  std::map<double, CodeWord> magnitudes;  // first code per magnitude wins
  for (const auto& cw : enumerate_codes(scheme)) {
    magnitudes.try_emplace(alpha * unit_magnitude(cw, scheme), cw);
  }

  LevelSet ls{scheme, alpha, {}, {}};
  ls.levels.reserve(2 * magnitudes.size() - 1);
  ls.codes.reserve(2 * magnitudes.size() - 1);
  for (auto it = magnitudes.rbegin(); it != magnitudes.rend(); ++it) {
    if (it->first == 0.0) continue;
    CodeWord neg = it->second;
    neg.sign = -1;
    ls.levels.push_back(-it->first);
    ls.codes.push_back(neg);
  }
  for (const auto& [mag, cw] : magnitudes) {
    ls.levels.push_back(mag);
    ls.codes.push_back(cw);
  }
  return ls;
}

double project(double w, const LevelSet& ls) {
  return ls.levels[nearest_index(w, ls)];
}

double project_tanh_transform(double w, const FixedPoint& scheme, double alpha) {
  validate(scheme);
  checked_alpha(alpha);
  const double c = std::clamp(w / alpha, -1.0, 1.0);
  const double h = std::tanh(c) / 2.0 + 0.5;
  const double steps = std::ldexp(1.0, scheme.bits) - 1.0;
  const double q = std::round(steps * h) / steps;
  const double back = std::atanh(2.0 * q - 1.0);
  return alpha * std::clamp(back, -1.0, 1.0);
}

CodeWord encode(double level, const LevelSet& ls) {
  const auto it = std::lower_bound(ls.levels.begin(), ls.levels.end(), level);
  if (it == ls.levels.end() || *it != level) {
    throw InputError("encode: " + std::to_string(level) + " is not a level of " + to_string(ls.scheme));
  }
  return ls.codes[static_cast<std::size_t>(it - ls.levels.begin())];
}

double decode(const CodeWord& cw, const LevelSet& ls) {
  const double mag = ls.alpha * unit_magnitude(cw, ls.scheme);
  return cw.sign < 0 ? -mag : mag;
}

// ---------------------------------------------------------------------------

QuantScheme QuantizedLayer::row_scheme(std::size_t r) const {
  if (partition.assignments.at(r) == RowScheme::kSp2) return schemes.sp2;
  return schemes.fixed;
}

ProjectedLayer project_matrix(const Matrix2D& w, const RowPartition& partition,
                              const MixedScheme& schemes, double alpha) {
  if (partition.rows() != w.rows()) {
    throw ShapeError("project_matrix: partition has " + std::to_string(partition.rows()) +
                     " rows, matrix has " + std::to_string(w.rows()));
  }
  const LevelSet fixed = build_levels(schemes.fixed, alpha);
  const LevelSet sp2 = build_levels(schemes.sp2, alpha);

  ProjectedLayer out{Matrix2D(w.rows(), w.cols()), {}};
  auto& layer = out.layer;
  layer.rows = w.rows();
  layer.cols = w.cols();
  layer.alpha = alpha;
  layer.schemes = schemes;
  layer.partition = partition;
  layer.codes.resize(w.size());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const LevelSet& ls = partition.assignments[r] == RowScheme::kSp2 ? sp2 : fixed;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const std::size_t idx = nearest_index(w(r, c), ls);
      out.values(r, c) = ls.levels[idx];
      layer.codes[r * w.cols() + c] = ls.codes[idx];
    }
  }
  return out;
}

Matrix2D dequantize_weights(const QuantizedLayer& layer) {
  if (layer.codes.size() != layer.rows * layer.cols || layer.partition.rows() != layer.rows) {
    throw ShapeError("dequantize_weights: inconsistent layer shape");
  }
  const LevelSet fixed = build_levels(layer.schemes.fixed, layer.alpha);
  const LevelSet sp2 = build_levels(layer.schemes.sp2, layer.alpha);
  Matrix2D out(layer.rows, layer.cols);
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const LevelSet& ls = layer.partition.assignments[r] == RowScheme::kSp2 ? sp2 : fixed;
    for (std::size_t c = 0; c < layer.cols; ++c) out(r, c) = decode(layer.code(r, c), ls);
  }
  return out;
}

namespace {

template <typename LevelsForRow>
double grid_search_alpha(const Matrix2D& w, LevelsForRow&& levels_for_row) {
  if (w.empty()) throw InputError("choose_alpha: empty matrix");
  const double wmax = w.max_abs();
  if (wmax == 0.0) return 1.0;

  double best_alpha = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 64; ++i) {
    const double alpha = wmax * (0.3 + 0.7 * static_cast<double>(i) / 63.0);
    double err = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const LevelSet& ls = levels_for_row(r, alpha);
      for (double x : w.row(r)) {
        const double d = project(x, ls) - x;
        err += d * d;
      }
    }
    if (err < best_err) {
      best_err = err;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace

double choose_alpha(const Matrix2D& w, const QuantScheme& scheme) {
  validate(scheme);
  LevelSet cache;
  double cached_alpha = -1.0;
  return grid_search_alpha(w, [&](std::size_t, double alpha) -> const LevelSet& {
    if (alpha != cached_alpha) {
      cache = build_levels(scheme, alpha);
      cached_alpha = alpha;
    }
    return cache;
  });
}

double choose_alpha(const Matrix2D& w, const RowPartition& partition, const MixedScheme& schemes) {
  if (partition.rows() != w.rows()) throw ShapeError("choose_alpha: partition/matrix row mismatch");
  LevelSet fixed, sp2;
  double cached_alpha = -1.0;
  return grid_search_alpha(w, [&](std::size_t r, double alpha) -> const LevelSet& {
    if (alpha != cached_alpha) {
      fixed = build_levels(schemes.fixed, alpha);
      sp2 = build_levels(schemes.sp2, alpha);
      cached_alpha = alpha;
    }
    return partition.assignments[r] == RowScheme::kSp2 ? sp2 : fixed;
  });
}

// ---------------------------------------------------------------------------

void validate(const ActQuant& aq) {
  if (aq.bits < 2 || aq.bits > 16) {
    throw ConfigError("activation bits must be in [2, 16], got " + std::to_string(aq.bits));
  }
  if (!(aq.clip > 0.0) || !std::isfinite(aq.clip)) {
    throw ConfigError("activation clip must be positive, got " + std::to_string(aq.clip));
  }
}

std::int64_t quantize_activation(double a, const ActQuant& aq) {
  if (std::isnan(a)) throw NumericError("quantize_activation: NaN activation");
  const double c = std::clamp(a, 0.0, aq.clip);
  return static_cast<std::int64_t>(std::round(c / aq.clip * static_cast<double>(aq.max_code())));
}

ActCodes quantize_activations(const Matrix2D& a, const ActQuant& aq) {
  validate(aq);
  ActCodes out{IntMatrix(a.rows(), a.cols()), aq.scale(), aq.bits};
  for (std::size_t i = 0; i < a.size(); ++i) out.codes.data[i] = quantize_activation(a.data()[i], aq);
  return out;
}

Matrix2D dequantize_activations(const ActCodes& codes) {
  Matrix2D out(codes.codes.rows, codes.codes.cols);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<double>(codes.codes.data[i]) * codes.scale;
  return out;
}

}  // namespace msq
