#include <gtest/gtest.h>

#include <cmath>

#include "msq/error.hpp"
#include "msq/train.hpp"
#include "oracles.hpp"

namespace msq {
namespace {

struct Problem {
  MlpModel model;
  Matrix2D x;
  std::vector<int> y;
};

Problem small_problem(std::uint64_t seed, std::vector<std::size_t> dims) {
  Rng rng(seed);
  Problem p{MlpModel::init(dims, rng), oracle::random_matrix(16, dims.front(), rng), {}};
  for (auto& layer : p.model.layers)
    for (double& b : layer.bias) b = 0.1 * rng.normal();
  for (std::size_t i = 0; i < 16; ++i) p.y.push_back(static_cast<int>(rng.below(dims.back())));
  return p;
}

double loss_of(const MlpModel& m, const Problem& p, const AdmmState* admm) {
  double l = cross_entropy(forward(m, p.x).logits, p.y);
  if (admm) l += admm_penalty(m, *admm);
  return l;
}

double max_rel_grad_error(const Problem& p, const AdmmState* admm) {
  const auto g = backward_ste(p.model, forward(p.model, p.x), p.y, admm);
  const double h = 1e-6;
  double worst = 0;
  auto check = [&](double analytic, double& param) {
    const double keep = param;
    param = keep + h;
    const double up = loss_of(p.model, p, admm);
    param = keep - h;
    const double down = loss_of(p.model, p, admm);
    param = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  auto& model = const_cast<MlpModel&>(p.model);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto w = model.layers[l].weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) check(g.weight[l].data()[i], w[i]);
    for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i) check(g.bias[l][i], model.layers[l].bias[i]);
  }
  return worst;
}

TEST(Gradients, MatchFiniteDifferences) {
  const auto p = small_problem(1, {5, 8, 3});
  EXPECT_LT(max_rel_grad_error(p, nullptr), 1e-4);
  const auto deep = small_problem(2, {4, 6, 5, 3});
  EXPECT_LT(max_rel_grad_error(deep, nullptr), 1e-4);
}

TEST(Gradients, IncludeAdmmPenalty) {
  const auto p = small_problem(3, {5, 8, 3});
  AdmmState s = AdmmState::init(p.model);
  Rng rng(4);
  for (auto& z : s.z)
    for (double& v : z.data()) v += 0.1 * rng.normal();
  for (auto& u : s.u)
    for (double& v : u.data()) v = 0.05 * rng.normal();
  EXPECT_LT(max_rel_grad_error(p, &s), 1e-4);
}

TEST(Gradients, SingleLayerIsLogisticRegression) {
  // Two-class softmax on one layer: d/dW = mean (p - onehot) x^T.
  const auto p = small_problem(5, {3, 2});
  const auto cache = forward(p.model, p.x);
  const auto g = backward_ste(p.model, cache, p.y);
  Matrix2D want(2, 3);
  for (std::size_t b = 0; b < 16; ++b) {
    const double z0 = cache.logits(b, 0), z1 = cache.logits(b, 1);
    const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
    const double d[2] = {(1 - p1) - (p.y[b] == 0), p1 - (p.y[b] == 1)};
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 3; ++i) want(o, i) += d[o] * p.x(b, i) / 16.0;
  }
  EXPECT_LT(oracle::max_rel_diff(g.weight[0], want), 1e-12);
}

TEST(Gradients, SteBlocksOutsideClip) {
  const auto p = small_problem(6, {4, 6, 3});
  ActQuantPlan plan(2);
  plan[1] = ActQuant{4, 1e-3};  // almost every activation is above the clip
  const auto cache = forward(p.model, p.x, plan);
  const auto g = backward_ste(p.model, cache, p.y);
  for (std::size_t o = 0; o < 6; ++o) {
    bool any_pass = false;
    for (std::size_t b = 0; b < 16; ++b) {
      const double raw = cache.raw_inputs[1](b, o);
      any_pass |= raw >= 0.0 && raw <= 1e-3 && cache.pre_act[0](b, o) > 0.0;
    }
    if (!any_pass) {
      for (double v : g.weight[0].row(o)) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(Loss, CrossEntropyValues) {
  const Matrix2D logits(2, 2, std::vector<double>{0, 0, 1000, 0});
  const std::vector<int> y{0, 0};
  EXPECT_NEAR(cross_entropy(logits, y), std::log(2.0) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(accuracy(logits, y), 1.0);
  EXPECT_THROW(cross_entropy(logits, std::vector<int>{0, 2}), InputError);
}

TEST(Admm, StepProjectsAndUpdatesDual) {
  const auto p = small_problem(7, {6, 10, 3});
  AdmmState s = AdmmState::init(p.model);
  const auto parts = partition_model(p.model, 0.5);
  admm_step(p.model, s, parts, MixedScheme{});
  EXPECT_EQ(s.epoch, 1);
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& w = p.model.layers[l].weight;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const QuantScheme sch = parts[l].assignments[r] == RowScheme::kSp2 ? QuantScheme{Sp2{2, 1}}
                                                                          : QuantScheme{FixedPoint{4}};
      const auto levels = oracle::levels(sch, s.alphas[l]);
      for (std::size_t c = 0; c < w.cols(); ++c) {
        EXPECT_TRUE(oracle::is_member(s.z[l](r, c), levels));
        EXPECT_DOUBLE_EQ(s.u[l](r, c), w(r, c) - s.z[l](r, c));
      }
    }
  }
  // Once W sits on the level set, the dual stops moving.
  MlpModel on_grid = p.model;
  for (std::size_t l = 0; l < 2; ++l) on_grid.layers[l].weight = s.z[l];
  AdmmState t = AdmmState::init(on_grid);
  const std::vector<double> alphas = s.alphas;
  admm_step(on_grid, t, parts, MixedScheme{}, alphas);
  for (const auto& u : t.u) EXPECT_EQ(u.max_abs(), 0.0);
  EXPECT_EQ(admm_penalty(on_grid, t), 0.0);
}

Dataset blobs(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  return make_synthetic(BlobSpec{2, 2, 2.0, 1.0}, n, rng);
}

TEST(Train, QuantizedTracksFloatBaseline) {
  const auto train_set = blobs(10, 600);
  const auto eval_set = blobs(11, 400);
  Rng rng(12);
  const auto init = MlpModel::init({2, 16, 2}, rng);
  TrainConfig cfg;
  cfg.epochs = 20;
  TrainConfig fcfg = cfg;
  fcfg.quantize = false;
  const auto q = train(init, train_set, cfg, &eval_set);
  const auto f = train(init, train_set, fcfg, &eval_set);
  EXPECT_GT(f.float_acc, 0.85);
  EXPECT_LE(f.float_acc - q.quant_acc, 0.02);
  ASSERT_EQ(q.layers.size(), 2u);
  ASSERT_EQ(q.history.size(), 20u);
  EXPECT_FALSE(q.act_plan[0].has_value());
  ASSERT_TRUE(q.act_plan[1].has_value());
  EXPECT_GT(q.act_plan[1]->clip, 0.0);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(dequantize_weights(q.layers[l]), q.model.layers[l].weight);
    EXPECT_EQ(q.layers[l].partition.sp2_count(), static_cast<std::size_t>(std::lround(q.layers[l].rows * cfg.pr_sp2)));
  }
  EXPECT_EQ(admm_penalty(q.model, q.admm), 0.0);
}

TEST(Train, Deterministic) {
  const auto data = blobs(20, 200);
  Rng r1(3), r2(3);
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto a = train(MlpModel::init({2, 8, 2}, r1), data, cfg);
  const auto b = train(MlpModel::init({2, 8, 2}, r2), data, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model.layers[0].weight, b.model.layers[0].weight);
}

TEST(Train, DivergenceRaisesTrainingError) {
  const auto data = blobs(21, 100);
  Rng rng(1);
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.quantize = false;
  try {
    train(MlpModel::init({2, 8, 2}, rng), data, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.pr_sp2 = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.schemes.sp2 = Sp2{1, 2};
  EXPECT_THROW(cfg.validate(), SchemeError);
  const auto data = blobs(22, 10);
  Rng rng(1);
  EXPECT_THROW(train(MlpModel::init({3, 4, 2}, rng), data, TrainConfig{}), ShapeError);
}

}  // namespace
}  // namespace msq
