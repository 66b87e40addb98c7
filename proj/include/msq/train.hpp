#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "msq/partition.hpp"
#include "msq/quantizers.hpp"
#include "msq/tensor.hpp"

namespace msq {

struct DenseLayer {
  Matrix2D weight;  // out x in
  std::vector<double> bias;
  bool relu = true;
};

/// Fully connected classifier; the last layer has no activation and feeds a
/// softmax cross-entropy loss.
struct MlpModel {
  std::vector<DenseLayer> layers;

  /// dims = {inputs, hidden..., classes}. He-uniform weights, zero biases.
  static MlpModel init(const std::vector<std::size_t>& dims, Rng& rng);
  void validate() const;
  std::size_t inputs() const { return layers.front().weight.cols(); }
  std::size_t outputs() const { return layers.back().weight.rows(); }
};

/// One entry per layer: quantizer for that layer's input, or nullopt.
/// An empty plan disables activation quantization.
using ActQuantPlan = std::vector<std::optional<ActQuant>>;

struct ForwardCache {
  std::vector<Matrix2D> raw_inputs;  // layer inputs before activation quantization
  std::vector<Matrix2D> inputs;      // layer inputs actually multiplied
  std::vector<Matrix2D> pre_act;     // x W^T + b
  Matrix2D logits;
  ActQuantPlan plan;
};

ForwardCache forward(const MlpModel& model, const Matrix2D& x, const ActQuantPlan& plan = {});

/// Mean softmax cross-entropy.
double cross_entropy(const Matrix2D& logits, std::span<const int> labels);
double accuracy(const Matrix2D& logits, std::span<const int> labels);

struct Gradients {
  std::vector<Matrix2D> weight;
  std::vector<std::vector<double>> bias;
};

/// ADMM auxiliary (Z) and dual (U) variables, one pair per layer.
struct AdmmState {
  std::vector<Matrix2D> z;
  std::vector<Matrix2D> u;
  std::vector<RowPartition> partitions;
  std::vector<double> alphas;
  int epoch = 0;

  /// U = 0, Z = W.
  static AdmmState init(const MlpModel& model);
};

/// Sum over layers of 1/2 ||W - Z + U||^2.
double admm_penalty(const MlpModel& model, const AdmmState& state);

/// Gradient of mean cross-entropy (+ the ADMM penalty when `admm` is given).
/// Activation quantizers pass the gradient through unchanged for inputs in
/// [0, clip] and block it outside.
Gradients backward_ste(const MlpModel& model, const ForwardCache& cache, std::span<const int> labels,
                       const AdmmState* admm = nullptr);

/// Z = proj(W + U) under each layer's partition; U = W - Z + U.
/// With `alphas` empty the per-layer scale is re-chosen by choose_alpha on W + U.
void admm_step(const MlpModel& model, AdmmState& state, std::span<const RowPartition> partitions,
               const MixedScheme& schemes, std::span<const double> alphas = {});

std::vector<RowPartition> partition_model(const MlpModel& model, double pr_sp2);

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double pr_sp2 = 2.0 / 3.0;
  MixedScheme schemes;
  int act_bits = 4;
  std::uint64_t seed = 1;
  /// false: plain SGD, no ADMM, no activation quantization, no projection.
  bool quantize = true;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double float_acc = 0.0;
  double quant_acc = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct TrainResult {
  MlpModel model;                       // final (projected, when quantizing) weights
  std::vector<QuantizedLayer> layers;   // empty when quantize == false
  ActQuantPlan act_plan;                // frozen activation clips
  AdmmState admm;
  std::vector<EpochMetrics> history;
  double float_acc = 0.0;  // accuracy of the unprojected weights before the final projection
  double quant_acc = 0.0;  // accuracy of the returned model
};

/// ADMM + STE quantization-aware training with per-epoch MSQ repartitioning.
/// Accuracies are measured on `eval` (defaults to the training set).
/// Throws TrainingError when the loss becomes non-finite.
TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& cfg,
                  const Dataset* eval = nullptr);

}  // namespace msq
