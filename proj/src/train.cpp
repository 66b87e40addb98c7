#include "msq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msq/error.hpp"

namespace msq {

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

MlpModel MlpModel::init(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("MlpModel: need at least input and output sizes");
  MlpModel m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    if (in == 0 || out == 0) throw ConfigError("MlpModel: layer sizes must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    DenseLayer layer{Matrix2D(out, in), std::vector<double>(out, 0.0), l + 2 < dims.size()};
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

void MlpModel::validate() const {
  if (layers.empty()) throw ConfigError("MlpModel: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows())
      throw ShapeError("MlpModel: bias size mismatch in layer " + std::to_string(l));
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
      throw ShapeError("MlpModel: layer " + std::to_string(l) + " input does not match previous output");
  }
}

// ---------------------------------------------------------------------------
// Forward / loss
// ---------------------------------------------------------------------------

namespace {

// `calib` (optional) holds running maxima of quantized layer inputs. When
// given, each quantized input first widens its running max and then uses it
// as the clip value.
ForwardCache forward_impl(const MlpModel& model, const Matrix2D& x, const ActQuantPlan& plan,
                          std::vector<double>* calib) {
  if (!plan.empty() && plan.size() != model.layers.size())
    throw ShapeError("forward: activation plan size != layer count");
  if (x.cols() != model.inputs())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(model.inputs()));

  ForwardCache cache;
  cache.plan = plan;
  Matrix2D cur = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    cache.raw_inputs.push_back(cur);
    if (!plan.empty() && plan[l]) {
      ActQuant aq = *plan[l];
      if (calib) {
        (*calib)[l] = std::max((*calib)[l], cur.max_abs());
        aq.clip = (*calib)[l] > 0.0 ? (*calib)[l] : 1.0;
        cache.plan[l] = aq;
      }
      cur = dequantize_activations(quantize_activations(cur, aq));
    }
    cache.inputs.push_back(cur);

    Matrix2D z(cur.rows(), layer.weight.rows());
    for (std::size_t b = 0; b < cur.rows(); ++b) {
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double acc = layer.bias[o];
        const auto wrow = layer.weight.row(o);
        const auto xrow = cur.row(b);
        for (std::size_t i = 0; i < wrow.size(); ++i) acc += xrow[i] * wrow[i];
        z(b, o) = acc;
      }
    }
    cache.pre_act.push_back(z);
    if (layer.relu)
      for (double& v : z.data()) v = std::max(v, 0.0);
    cur = std::move(z);
  }
  cache.logits = std::move(cur);
  return cache;
}

Matrix2D softmax(const Matrix2D& logits) {
  Matrix2D p(logits.rows(), logits.cols());
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto row = logits.row(b);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) sum += (p(b, k) = std::exp(row[k] - mx));
    for (std::size_t k = 0; k < row.size(); ++k) p(b, k) /= sum;
  }
  return p;
}

void check_labels(const Matrix2D& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("labels/logits batch mismatch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) throw InputError("label out of range");
}

}  // namespace

ForwardCache forward(const MlpModel& model, const Matrix2D& x, const ActQuantPlan& plan) {
  return forward_impl(model, x, plan, nullptr);
}

double cross_entropy(const Matrix2D& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  double loss = 0.0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto row = logits.row(b);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    loss += std::log(sum) + mx - row[static_cast<std::size_t>(labels[b])];
  }
  return loss / static_cast<double>(logits.rows());
}

double accuracy(const Matrix2D& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto row = logits.row(b);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    hits += pred == labels[b];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

// ---------------------------------------------------------------------------
// ADMM
// ---------------------------------------------------------------------------

AdmmState AdmmState::init(const MlpModel& model) {
  AdmmState s;
  for (const auto& layer : model.layers) {
    s.z.push_back(layer.weight);
    s.u.emplace_back(layer.weight.rows(), layer.weight.cols());
    s.partitions.push_back(RowPartition::uniform(layer.weight.rows(), RowScheme::kFixed));
    s.alphas.push_back(1.0);
  }
  return s;
}

double admm_penalty(const MlpModel& model, const AdmmState& state) {
  double p = 0.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto w = model.layers[l].weight.data();
    const auto z = state.z[l].data();
    const auto u = state.u[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - z[i] + u[i];
      p += 0.5 * d * d;
    }
  }
  return p;
}

Gradients backward_ste(const MlpModel& model, const ForwardCache& cache, std::span<const int> labels,
                       const AdmmState* admm) {
  const std::size_t n_layers = model.layers.size();
  if (cache.inputs.size() != n_layers) throw ShapeError("backward_ste: cache does not match model");
  check_labels(cache.logits, labels);

  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);

  // d(mean CE)/d logits = (softmax - onehot) / B
  const double inv_b = 1.0 / static_cast<double>(cache.logits.rows());
  Matrix2D dz = softmax(cache.logits);
  for (std::size_t b = 0; b < dz.rows(); ++b) {
    dz(b, static_cast<std::size_t>(labels[b])) -= 1.0;
    for (double& v : dz.row(b)) v *= inv_b;
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = model.layers[l];
    const Matrix2D& x = cache.inputs[l];

    Matrix2D gw(layer.weight.rows(), layer.weight.cols());
    std::vector<double> gb(layer.weight.rows(), 0.0);
    for (std::size_t b = 0; b < dz.rows(); ++b) {
      for (std::size_t o = 0; o < gw.rows(); ++o) {
        const double d = dz(b, o);
        if (d == 0.0) continue;
        gb[o] += d;
        auto grow = gw.row(o);
        const auto xrow = x.row(b);
        for (std::size_t i = 0; i < grow.size(); ++i) grow[i] += d * xrow[i];
      }
    }
    if (admm) {
      const auto w = layer.weight.data();
      const auto z = admm->z[l].data();
      const auto u = admm->u[l].data();
      auto gd = gw.data();
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += w[i] - z[i] + u[i];
    }
    g.weight[l] = std::move(gw);
    g.bias[l] = std::move(gb);
    if (l == 0) break;

    // Propagate to this layer's input, then through quantizer (STE) and ReLU.
    Matrix2D dx(dz.rows(), layer.weight.cols());
    for (std::size_t b = 0; b < dz.rows(); ++b) {
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        const double d = dz(b, o);
        if (d == 0.0) continue;
        const auto wrow = layer.weight.row(o);
        auto dxrow = dx.row(b);
        for (std::size_t i = 0; i < wrow.size(); ++i) dxrow[i] += d * wrow[i];
      }
    }
    if (!cache.plan.empty() && cache.plan[l]) {
      const double clip = cache.plan[l]->clip;
      const auto raw = cache.raw_inputs[l].data();
      auto d = dx.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (raw[i] < 0.0 || raw[i] > clip) d[i] = 0.0;
    }
    const auto& prev = model.layers[l - 1];
    if (prev.relu) {
      const auto z = cache.pre_act[l - 1].data();
      auto d = dx.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (z[i] <= 0.0) d[i] = 0.0;
    }
    dz = std::move(dx);
  }
  return g;
}

void admm_step(const MlpModel& model, AdmmState& state, std::span<const RowPartition> partitions,
               const MixedScheme& schemes, std::span<const double> alphas) {
  const std::size_t n = model.layers.size();
  if (partitions.size() != n || state.z.size() != n || state.u.size() != n)
    throw ShapeError("admm_step: per-layer state does not match model");
  if (!alphas.empty() && alphas.size() != n) throw ShapeError("admm_step: alpha count != layer count");

  for (std::size_t l = 0; l < n; ++l) {
    const Matrix2D& w = model.layers[l].weight;
    Matrix2D target = w;
    auto t = target.data();
    const auto u = state.u[l].data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += u[i];

    const double alpha = alphas.empty() ? choose_alpha(target, partitions[l], schemes) : alphas[l];
    Matrix2D z = project_matrix(target, partitions[l], schemes, alpha).values;

    auto un = state.u[l].data();
    const auto wd = w.data();
    const auto zd = z.data();
    for (std::size_t i = 0; i < un.size(); ++i) un[i] = wd[i] - zd[i] + un[i];
    state.z[l] = std::move(z);
    state.partitions[l] = partitions[l];
    state.alphas[l] = alpha;
  }
  ++state.epoch;
}

std::vector<RowPartition> partition_model(const MlpModel& model, double pr_sp2) {
  std::vector<RowPartition> parts;
  for (const auto& layer : model.layers) {
    // A one-column layer has no row variance; rank every row equal.
    if (layer.weight.cols() < 2) {
      parts.push_back(partition_rows(std::vector<double>(layer.weight.rows(), 0.0), pr_sp2));
    } else {
      parts.push_back(partition_layer(layer.weight, pr_sp2));
    }
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("TrainConfig: learning_rate must be positive");
  if (!(pr_sp2 >= 0.0 && pr_sp2 <= 1.0)) throw ConfigError("TrainConfig: pr_sp2 must be in [0, 1]");
  msq::validate(QuantScheme{schemes.fixed});
  msq::validate(QuantScheme{schemes.sp2});
  if (act_bits < 2 || act_bits > 16) throw ConfigError("TrainConfig: act_bits must be in [2, 16]");
}

namespace {

struct Projected {
  MlpModel model;
  std::vector<QuantizedLayer> layers;
};

Projected project_model(const MlpModel& model, std::span<const RowPartition> parts,
                        std::span<const double> alphas, const MixedScheme& schemes, int act_bits) {
  Projected p{model, {}};
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto proj = project_matrix(model.layers[l].weight, parts[l], schemes, alphas[l]);
    proj.layer.name = "layer_" + std::to_string(l);
    proj.layer.act_bits = act_bits;
    p.model.layers[l].weight = std::move(proj.values);
    p.layers.push_back(std::move(proj.layer));
  }
  return p;
}

// Raw data stays in floating point: only post-ReLU inputs are unsigned and
// go through the activation quantizer.
ActQuantPlan make_plan(const MlpModel& model, const std::vector<double>& clips, int bits) {
  ActQuantPlan plan(model.layers.size());
  for (std::size_t l = 1; l < model.layers.size(); ++l) {
    if (model.layers[l - 1].relu) plan[l] = ActQuant{bits, clips[l] > 0.0 ? clips[l] : 1.0};
  }
  return plan;
}

double eval_accuracy(const MlpModel& m, const Dataset& d, const ActQuantPlan& plan) {
  return accuracy(forward(m, d.inputs, plan).logits, d.labels);
}

}  // namespace

TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& cfg, const Dataset* eval) {
  cfg.validate();
  model.validate();
  if (data.size() == 0) throw InputError("train: empty dataset");
  if (data.inputs.cols() != model.inputs()) throw ShapeError("train: dataset features != model inputs");
  const Dataset& eval_set = eval ? *eval : data;

  const std::size_t n_layers = model.layers.size();
  Rng rng(cfg.seed);
  TrainResult res;
  res.admm = AdmmState::init(model);
  std::vector<double> act_max(n_layers, 0.0);
  ActQuantPlan plan = cfg.quantize ? make_plan(model, act_max, cfg.act_bits) : ActQuantPlan{};

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.quantize) {
      const auto parts = partition_model(model, cfg.pr_sp2);
      admm_step(model, res.admm, parts, cfg.schemes);
    }
    rng.shuffle(order);

    // Activation clips are calibrated as running maxima during epoch 1 and frozen afterwards.
    const bool calibrating = cfg.quantize && epoch == 1;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix2D xb = gather_rows(data.inputs, idx);
      std::vector<int> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.labels[idx[i]];

      const ForwardCache cache = forward_impl(model, xb, plan, calibrating ? &act_max : nullptr);
      double loss = cross_entropy(cache.logits, yb);
      if (cfg.quantize) loss += admm_penalty(model, res.admm);
      if (!std::isfinite(loss)) throw TrainingError(epoch, "loss is not finite");
      loss_sum += loss;
      ++batches;

      const Gradients g = backward_ste(model, cache, yb, cfg.quantize ? &res.admm : nullptr);
      for (std::size_t l = 0; l < n_layers; ++l) {
        auto w = model.layers[l].weight.data();
        const auto gw = g.weight[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
        auto& bias = model.layers[l].bias;
        for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= cfg.learning_rate * g.bias[l][i];
      }
    }
    if (calibrating) plan = make_plan(model, act_max, cfg.act_bits);
    for (const auto& layer : model.layers)
      if (!layer.weight.all_finite()) throw TrainingError(epoch, "weights are not finite");

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(batches);
    m.float_acc = eval_accuracy(model, eval_set, {});
    if (cfg.quantize) {
      const auto q = project_model(model, res.admm.partitions, res.admm.alphas, cfg.schemes, cfg.act_bits);
      m.quant_acc = eval_accuracy(q.model, eval_set, plan);
    } else {
      m.quant_acc = m.float_acc;
    }
    res.history.push_back(m);
  }

  res.float_acc = eval_accuracy(model, eval_set, {});
  if (cfg.quantize) {
    // Final hard projection with partitions and scales from the final weights.
    const auto parts = partition_model(model, cfg.pr_sp2);
    std::vector<double> alphas(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l)
      alphas[l] = choose_alpha(model.layers[l].weight, parts[l], cfg.schemes);
    auto q = project_model(model, parts, alphas, cfg.schemes, cfg.act_bits);
    res.model = std::move(q.model);
    res.layers = std::move(q.layers);
    res.act_plan = plan;
    for (std::size_t l = 0; l < n_layers; ++l) {
      res.admm.z[l] = res.model.layers[l].weight;
      res.admm.u[l] = Matrix2D(res.admm.u[l].rows(), res.admm.u[l].cols());
      res.admm.partitions[l] = parts[l];
      res.admm.alphas[l] = alphas[l];
    }
    res.quant_acc = eval_accuracy(res.model, eval_set, res.act_plan);
  } else {
    res.model = std::move(model);
    res.quant_acc = res.float_acc;
  }
  return res;
}

}  // namespace msq
