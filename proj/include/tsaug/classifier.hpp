#pragma once

// 1-D residual classifier: three residual blocks of three same-padded
// convolutions (conv -> batch norm -> ReLU), a shortcut per block (width-1
// conv + batch norm when the channel count changes, identity otherwise),
// global average pooling to the embedding g(z), and a dense layer to logits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsaug/adam.hpp"
#include "tsaug/dataio.hpp"
#include "tsaug/ops.hpp"

namespace tsaug {

struct AugmentedDataset;

struct ClassifierArch {
  std::size_t series_length = 0;
  std::size_t num_classes = 0;
  std::array<std::size_t, 3> filters{64, 128, 128};
  std::array<std::size_t, 3> widths{7, 5, 3};

  std::size_t embedding_dim() const { return filters[2]; }
  void validate() const;
};

inline constexpr std::size_t kConvLayers = 9;

// Trainable parameter count (weights, biases, batch-norm scale/shift) of the
// architecture; independent of the series length.
std::size_t classifier_parameter_count(const ClassifierArch& arch);

struct TrainConfig {
  double learning_rate = 2e-4;
  double weight_decay = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  bool feat_sim_enabled = false;
  double margin_alpha = 0.2;
  double feat_sim_weight = 1.0;
  bool feat_sim_hinge = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClassifierProvenance {
  TrainConfig config;
  bool trained = false;
  std::size_t train_size = 0;
  double first_epoch_ce = 0.0;
  double final_epoch_ce = 0.0;
};

class ClassifierModel {
 public:
  static ClassifierModel initialize(const ClassifierArch& arch, std::uint64_t seed);

  const ClassifierArch& arch() const { return arch_; }
  const NamedTensors& params() const { return params_; }
  NamedTensors& mutable_params() { return params_; }
  const NamedTensors& buffers() const { return buffers_; }
  const ClassifierProvenance& provenance() const { return provenance_; }
  std::size_t conv_layer_count() const;

  NamedTensors to_tensors() const;
  static ClassifierModel from_tensors(const NamedTensors& tensors);

  friend bool operator==(const ClassifierModel& a, const ClassifierModel& b) {
    return a.to_tensors() == b.to_tensors();
  }

 private:
  friend ClassifierModel train_classifier(const SeriesDataset&, const TrainConfig&, const AugmentedDataset*);

  ClassifierArch arch_;
  NamedTensors params_;
  NamedTensors buffers_;  // batch-norm running statistics
  ClassifierProvenance provenance_;
};

struct ForwardOutput {
  Var embeddings;  // [batch, d]
  Var logits;      // [batch, K]
  std::array<Var, 3> block_outputs;
  std::array<Var, 3> shortcut_outputs;
};

// Binds one model into one graph. Parameters enter the graph once, so several
// forward passes on the same binding share gradient accumulators.
class ClassifierGraph {
 public:
  ClassifierGraph(Graph& graph, const ClassifierModel& model, bool trainable);

  // input [batch, 1, T]. Train mode chains the batch-norm running-statistic
  // updates, readable through updated_buffers().
  ForwardOutput forward(Var input, Mode mode);

  NamedTensors gradients() const;
  const NamedTensors& updated_buffers() const { return buffers_; }
  Var param(const std::string& name) const;

 private:
  Var bn(const std::string& prefix, Var x, Mode mode);

  Graph& graph_;
  const ClassifierModel& model_;
  std::vector<Var> vars_;
  NamedTensors buffers_;
};

// [n, 1, T] input tensor; every series must have `length` values.
Tensor make_input(std::span<const std::vector<double>> series, std::size_t length);

struct Predictions {
  std::vector<std::vector<double>> embeddings;
  std::vector<std::vector<double>> logits;
};

// Eval-mode forward over any number of series (processed in chunks).
Predictions predict(const ClassifierModel& model, std::span<const std::vector<double>> series);

struct InputGradients {
  std::vector<double> losses;                   // per-sample cross-entropy
  std::vector<std::vector<double>> gradients;   // d loss_i / d z_i
};

// Eval-mode cross-entropy at the given labels and its gradient w.r.t. each
// input series. Results for a sample do not depend on what else is batched.
InputGradients input_loss_gradients(const ClassifierModel& model, std::span<const std::vector<double>> series,
                                    std::span<const std::size_t> labels);

// g(z) / ||g(z)||; a norm below 1e-12 yields e_1 and sets *degenerate.
std::vector<double> normalized_embedding(const ClassifierModel& model, std::span<const double> series,
                                         bool* degenerate = nullptr);
std::vector<double> normalize_embedding(std::span<const double> embedding, bool* degenerate = nullptr);

// max(0, ||a - p||^2 + alpha - ||a - n||^2) on unit vectors (tolerance 1e-6);
// hinge = false drops the max.
double feat_sim_loss(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const double> negative, double alpha, bool hinge = true);

// Cross-entropy over the original plus augmented samples; with feat_sim
// enabled adds weight * mean triplet loss over triplets drawn per batch
// (anchor = source of an augmented sample, negative = augmented version of a
// random training series of another class).
ClassifierModel train_classifier(const SeriesDataset& train_data, const TrainConfig& config,
                                 const AugmentedDataset* augmented = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> predictions;
};

// Argmax accuracy; ties resolve to the smaller class index.
std::size_t argmax_class(std::span<const double> logits);
EvalResult evaluate(const ClassifierModel& model, const SeriesDataset& dataset);
// Same scoring from logits already computed for `dataset`.
EvalResult evaluate(std::span<const std::vector<double>> logits, const SeriesDataset& dataset, std::size_t num_classes);

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace tsaug
