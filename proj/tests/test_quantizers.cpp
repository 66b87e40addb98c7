#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "msq/error.hpp"
#include "msq/quantizers.hpp"
#include "oracles.hpp"

namespace msq {
namespace {

std::vector<QuantScheme> all_schemes() {
  std::vector<QuantScheme> s;
  for (int m = 2; m <= 8; ++m) {
    s.push_back(FixedPoint{m});
    s.push_back(PowerOfTwo{m});
  }
  for (int m1 = 1; m1 <= 4; ++m1)
    for (int m2 = 1; m2 <= m1; ++m2) s.push_back(Sp2{m1, m2});
  return s;
}

TEST(Levels, FixedFourBit) {
  const auto ls = build_levels(FixedPoint{4}, 1.0);
  ASSERT_EQ(ls.levels.size(), 15u);
  for (int k = -7; k <= 7; ++k) EXPECT_EQ(ls.levels[k + 7], k / 7.0);
}

TEST(Levels, PowerOfTwoFourBit) {
  const auto ls = build_levels(PowerOfTwo{4}, 1.0);
  const std::vector<double> pos{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  std::vector<double> want;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) want.push_back(-*it);
  want.push_back(0.0);
  want.insert(want.end(), pos.begin(), pos.end());
  EXPECT_EQ(ls.levels, want);
}

TEST(Levels, Sp2TwoOneHasThirteen) {
  const auto ls = build_levels(Sp2{2, 1}, 1.0);
  const std::vector<double> want{-1, -0.75, -0.625, -0.5, -0.25, -0.125, 0, 0.125, 0.25, 0.5, 0.625, 0.75, 1};
  EXPECT_EQ(ls.levels, want);
}

TEST(Levels, MatchEnumerationAndAreSymmetric) {
  for (const auto& s : all_schemes()) {
    for (double alpha : {1.0, 0.37, 3.0}) {
      const auto ls = build_levels(s, alpha);
      EXPECT_EQ(ls.levels, oracle::levels(s, alpha)) << to_string(s);
      ASSERT_EQ(ls.codes.size(), ls.levels.size());
      EXPECT_TRUE(oracle::is_member(0.0, ls.levels));
      for (std::size_t i = 0; i < ls.levels.size(); ++i)
        EXPECT_EQ(ls.levels[i], -ls.levels[ls.levels.size() - 1 - i]);
      if (!std::holds_alternative<Sp2>(s)) {
        EXPECT_EQ(static_cast<int>(ls.levels.size()), (1 << total_bits(s)) - 1) << to_string(s);
      } else {
        EXPECT_LE(static_cast<int>(ls.levels.size()), (1 << total_bits(s)) - 1);
      }
    }
  }
}

TEST(Levels, InvalidSchemes) {
  EXPECT_THROW(build_levels(FixedPoint{1}, 1.0), SchemeError);
  EXPECT_THROW(build_levels(PowerOfTwo{11}, 1.0), SchemeError);
  EXPECT_THROW(build_levels(Sp2{1, 2}, 1.0), SchemeError);
  EXPECT_THROW(build_levels(Sp2{6, 1}, 1.0), SchemeError);
  EXPECT_THROW(build_levels(FixedPoint{4}, 0.0), SchemeError);
  EXPECT_THROW(build_levels(FixedPoint{4}, std::nan("")), SchemeError);
}

TEST(Project, Examples) {
  EXPECT_EQ(project(0.3, build_levels(FixedPoint{4}, 1.0)), 2.0 / 7.0);
  EXPECT_EQ(project(0.6, build_levels(Sp2{2, 1}, 1.0)), 0.625);
  EXPECT_EQ(project(0.3, build_levels(PowerOfTwo{4}, 1.0)), 0.25);
  for (const auto& s : all_schemes()) {
    EXPECT_EQ(project(-1.5, build_levels(s, 1.0)), -1.0);
    EXPECT_EQ(project(7.0, build_levels(s, 2.0)), 2.0);
  }
}

TEST(Project, TiesGoToSmallerMagnitude) {
  const auto fx = build_levels(FixedPoint{3}, 3.0);  // 0, 1, 2, 3
  EXPECT_EQ(project(1.5, fx), 1.0);
  EXPECT_EQ(project(-2.5, fx), -2.0);
  EXPECT_EQ(project(0.5, fx), 0.0);
  const auto sp = build_levels(Sp2{2, 1}, 1.0);
  EXPECT_EQ(project(0.0625, sp), 0.0);
  EXPECT_EQ(project(0.875, sp), 0.75);
}

TEST(Project, P2ZeroThresholdIsArithmeticMidpoint) {
  const auto ls = build_levels(PowerOfTwo{4}, 1.0);
  EXPECT_EQ(project(1.0 / 128, ls), 0.0);
  EXPECT_EQ(project(std::nextafter(1.0 / 128, 1.0), ls), 1.0 / 64);
}

TEST(Project, AgreesWithBruteForce) {
  Rng rng(17);
  for (const auto& s : all_schemes()) {
    const double alpha = 0.8;
    const auto ls = build_levels(s, alpha);
    const auto levels = oracle::levels(s, alpha);
    for (int i = 0; i < 3000; ++i) {
      const double w = rng.uniform(-1.2, 1.2);
      ASSERT_EQ(project(w, ls), oracle::nearest(w, levels, alpha)) << to_string(s) << " w=" << w;
    }
    // Exact midpoints between neighbours.
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      const double mid = 0.5 * (levels[i] + levels[i + 1]);
      ASSERT_EQ(project(mid, ls), oracle::nearest(mid, levels, alpha)) << to_string(s) << " mid=" << mid;
    }
  }
}

TEST(Project, IdempotentAndScaleEquivariant) {
  Rng rng(23);
  for (const auto& s : all_schemes()) {
    const auto ls = build_levels(s, 1.0);
    for (int i = 0; i < 500; ++i) {
      const double w = rng.uniform(-1.5, 1.5);
      const double p = project(w, ls);
      EXPECT_EQ(project(p, ls), p);
      for (double c : {0.5, 2.0, 3.7}) {
        EXPECT_NEAR(project(c * w, build_levels(s, c)), c * p, 1e-12);
      }
    }
  }
}

TEST(Project, NanThrows) { EXPECT_THROW(project(std::nan(""), build_levels(FixedPoint{4}, 1.0)), NumericError); }

TEST(TanhTransform, StaysOnItsOwnGrid) {
  // Outputs are alpha * atanh(2k/15 - 1) clipped to [-alpha, alpha]; 0 is not on that grid.
  const double alpha = 1.5;
  std::vector<double> grid;
  for (int k = 0; k <= 15; ++k) grid.push_back(alpha * std::clamp(std::atanh(2.0 * k / 15.0 - 1.0), -1.0, 1.0));
  double prev = -INFINITY;
  for (double w = -2.0; w <= 2.0; w += 0.01) {
    const double q = project_tanh_transform(w, FixedPoint{4}, alpha);
    EXPECT_LE(std::abs(q), alpha);
    EXPECT_GE(q, prev);
    prev = q;
    EXPECT_TRUE(std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(g - q) < 1e-12; }));
  }
  EXPECT_GT(std::abs(project_tanh_transform(0.0, FixedPoint{4}, alpha)), 0.0);
}

TEST(CodeWords, Examples) {
  const auto ls = build_levels(Sp2{2, 1}, 1.0);
  const auto c0625 = encode(0.625, ls);
  EXPECT_EQ(c0625.sign, 1);
  EXPECT_EQ(c0625.e1, 3);  // q1 = 1/8
  EXPECT_EQ(c0625.e2, 1);  // q2 = 1/2
  const auto one = encode(1.0, ls);
  EXPECT_EQ(one.e1, 1);
  EXPECT_EQ(one.e2, 1);
  const auto half = encode(0.5, ls);
  EXPECT_EQ(half.e1, 1);
  EXPECT_EQ(half.e2, std::nullopt);
  const auto zero = encode(0.0, ls);
  EXPECT_EQ(zero, CodeWord{});
  EXPECT_THROW(encode(0.3, ls), InputError);
  EXPECT_EQ(encode(-3.0 / 7.0, build_levels(FixedPoint{4}, 1.0)).magnitude, 3u);
}

TEST(CodeWords, RoundTripEveryLevel) {
  for (const auto& s : all_schemes()) {
    const auto ls = build_levels(s, 0.75);
    for (double l : ls.levels) {
      const auto cw = encode(l, ls);
      EXPECT_EQ(decode(cw, ls), l) << to_string(s);
      const auto bits = pack(cw, s);
      EXPECT_LT(bits, 1u << total_bits(s));
      EXPECT_EQ(unpack(bits, s), cw) << to_string(s);
    }
  }
}

TEST(CodeWords, PackLayout) {
  // sign | q1 field (2 bits) | q2 field (1 bit)
  EXPECT_EQ(pack(CodeWord{1, 0, 3, 1}, Sp2{2, 1}), 0b0111u);
  EXPECT_EQ(pack(CodeWord{-1, 0, 1, std::nullopt}, Sp2{2, 1}), 0b1010u);
  EXPECT_EQ(pack(CodeWord{-1, 5, {}, {}}, FixedPoint{4}), 0b1101u);
  EXPECT_EQ(pack(CodeWord{1, 0, 0, {}}, PowerOfTwo{4}), 1u);
  EXPECT_THROW(pack(CodeWord{1, 8, {}, {}}, FixedPoint{4}), InputError);
  EXPECT_THROW(unpack(16u, FixedPoint{4}), InputError);
  EXPECT_THROW(unpack(0b1000u, FixedPoint{4}), InputError);  // negative zero
}

TEST(ProjectMatrix, RowExampleAndIdempotence) {
  const Matrix2D w(1, 4, std::vector<double>{0.3, -0.3, 0.9, -1.5});
  const auto part = RowPartition::uniform(1, RowScheme::kFixed);
  const auto p = project_matrix(w, part, MixedScheme{}, 1.0);
  EXPECT_EQ(p.values, Matrix2D(1, 4, std::vector<double>{2.0 / 7, -2.0 / 7, 6.0 / 7, -1.0}));
  EXPECT_EQ(project_matrix(p.values, part, MixedScheme{}, 1.0).values, p.values);
  EXPECT_EQ(dequantize_weights(p.layer), p.values);
  EXPECT_THROW(project_matrix(w, RowPartition::uniform(2, RowScheme::kFixed), MixedScheme{}, 1.0), ShapeError);
}

TEST(ProjectMatrix, MixedRowsUseTheirOwnLevels) {
  Rng rng(4);
  const auto w = oracle::random_matrix(12, 20, rng, 0.5);
  const auto part = partition_layer(w, 0.5);
  const MixedScheme ms{FixedPoint{4}, Sp2{2, 1}};
  const double alpha = choose_alpha(w, part, ms);
  const auto p = project_matrix(w, part, ms, alpha);
  for (std::size_t r = 0; r < 12; ++r) {
    const auto levels = oracle::levels(p.layer.row_scheme(r), alpha);
    for (std::size_t c = 0; c < 20; ++c) {
      EXPECT_EQ(p.values(r, c), oracle::nearest(w(r, c), levels, alpha));
    }
  }
  EXPECT_EQ(dequantize_weights(p.layer), p.values);
  EXPECT_EQ(project_matrix(Matrix2D(3, 3), RowPartition::uniform(3, RowScheme::kSp2), ms, 1.0).values,
            Matrix2D(3, 3));
}

double mse_oracle(const Matrix2D& w, const QuantScheme& s, double alpha) {
  const auto levels = oracle::levels(s, alpha);
  double e = 0;
  for (double v : w.data()) {
    const double d = oracle::nearest(v, levels, alpha) - v;
    e += d * d;
  }
  return e / static_cast<double>(w.size());
}

TEST(ChooseAlpha, MatchesExhaustiveGrid) {
  Rng rng(8);
  Matrix2D w(8, 16);
  for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
  w(0, 0) = 1.0;
  for (const QuantScheme& s : {QuantScheme{FixedPoint{4}}, QuantScheme{Sp2{2, 1}}, QuantScheme{PowerOfTwo{4}}}) {
    double best = 0, best_err = INFINITY;
    for (int i = 0; i < 64; ++i) {
      const double a = 0.3 + 0.7 * i / 63.0;
      const double e = mse_oracle(w, s, a);
      if (e < best_err) {
        best_err = e;
        best = a;
      }
    }
    EXPECT_NEAR(choose_alpha(w, s), best, 1e-15) << to_string(s);
  }
}

TEST(ChooseAlpha, ZeroAndScale) {
  EXPECT_EQ(choose_alpha(Matrix2D(2, 2), FixedPoint{4}), 1.0);
  Rng rng(12);
  const auto w = oracle::random_matrix(6, 10, rng);
  Matrix2D w2 = w;
  for (double& v : w2.data()) v *= 2.0;
  EXPECT_NEAR(choose_alpha(w2, Sp2{2, 1}), 2.0 * choose_alpha(w, Sp2{2, 1}), 1e-12);
  EXPECT_THROW(choose_alpha(Matrix2D(), FixedPoint{4}), InputError);
}

TEST(Activations, Examples) {
  const ActQuant aq{4, 1.0};
  EXPECT_EQ(quantize_activation(0.0, aq), 0);
  EXPECT_EQ(quantize_activation(1.0, aq), 15);
  EXPECT_EQ(quantize_activation(0.52, aq), 8);
  EXPECT_EQ(quantize_activation(-3.0, aq), 0);
  EXPECT_EQ(quantize_activation(9.0, aq), 15);
  EXPECT_EQ(quantize_activation(0.5 / 15.0 * 3.0, ActQuant{4, 1.0}), 2);  // 1.5 -> 2, half away from zero
  EXPECT_THROW(validate(ActQuant{4, 0.0}), ConfigError);
  EXPECT_THROW(validate(ActQuant{1, 1.0}), ConfigError);
  EXPECT_THROW(quantize_activation(std::nan(""), aq), NumericError);
}

TEST(Activations, RangeAndRoundTrip) {
  Rng rng(6);
  Matrix2D a(10, 10);
  for (double& v : a.data()) v = rng.uniform(-0.5, 3.0);
  for (int bits : {2, 4, 8}) {
    const ActQuant aq{bits, 2.5};
    const auto codes = quantize_activations(a, aq);
    EXPECT_DOUBLE_EQ(codes.scale, 2.5 / aq.max_code());
    const auto back = dequantize_activations(codes);
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_GE(codes.codes.data[i], 0);
      ASSERT_LE(codes.codes.data[i], aq.max_code());
      const double clipped = std::clamp(a.data()[i], 0.0, 2.5);
      EXPECT_LE(std::abs(back.data()[i] - clipped), codes.scale / 2 + 1e-12);
    }
  }
}

}  // namespace
}  // namespace msq
