#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tracemark::nn {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

enum class LayerKind : std::uint8_t { kConv2d = 1, kMaxPool = 2, kDense = 3, kRelu = 4 };

// One stage of the feed-forward stack. Parameterised layers own their
// weights: conv is [out][in_channels][kernel][kernel], dense is [out][in].
struct Layer {
  LayerKind kind = LayerKind::kRelu;
  int out = 0;     // conv output channels / dense output width
  int kernel = 0;  // conv only
  int stride = 1;  // conv only
  int window = 0;  // max-pool only (stride == window)
  std::vector<float> weights;
  std::vector<float> bias;

  bool has_params() const { return kind == LayerKind::kConv2d || kind == LayerKind::kDense; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

Layer conv2d(int out_channels, int kernel, int stride = 1);
Layer max_pool(int window);
Layer dense(int out);
Layer relu();

// Layers are applied in order; the final dense layer produces logits and
// a softmax turns them into class probabilities.
struct ModelSnapshot {
  Shape input;
  std::vector<Layer> layers;
  int num_classes = 0;

  /// Output shape of every layer; throws if the stack does not chain from
  /// `input` to `num_classes`.
  std::vector<Shape> layer_shapes() const;
  std::size_t weight_count() const;  // biases excluded
  std::size_t parameter_count() const;

  friend bool operator==(const ModelSnapshot&, const ModelSnapshot&) = default;
};

/// Validates the stack and initialises weights uniformly in
/// +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
ModelSnapshot build_model(Shape input, std::vector<Layer> layers, std::uint64_t seed);

/// conv(8,5x5)-relu-pool2-conv(16,5x5)-relu-pool2-dense(64)-relu-dense(N).
ModelSnapshot desk_cnn(Shape input, int num_classes, std::uint64_t seed);

struct LabeledDataset {
  Shape shape;
  std::vector<float> inputs;  // size() * shape.size(), CHW per item
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const float> input(std::size_t i) const {
    return {inputs.data() + i * shape.size(), shape.size()};
  }
  void add(std::span<const float> x, int label);
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

// ---- inference -------------------------------------------------------------

std::vector<double> logits(const ModelSnapshot& model, std::span<const float> x);
std::vector<double> forward(const ModelSnapshot& model, std::span<const float> x);
std::vector<double> softmax(std::span<const double> z);

/// argmax over the first `classes` outputs (all outputs when classes <= 0).
int predict(const ModelSnapshot& model, std::span<const float> x, int classes = 0);

/// Fraction of items whose argmax (over the first `classes` outputs, or all)
/// equals the label.
double accuracy(const ModelSnapshot& model, const LabeledDataset& data, int classes = 0);

double mean_loss(const ModelSnapshot& model, const LabeledDataset& data);

// ---- training --------------------------------------------------------------

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct TrainResult {
  ModelSnapshot model;
  std::vector<double> epoch_loss;  // mean mini-batch loss per epoch
};

/// Mini-batch SGD with momentum on mean cross-entropy. The input snapshot
/// is not modified; shuffling is seeded by cfg.seed.
TrainResult train_with_history(const ModelSnapshot& model, const LabeledDataset& data,
                               const TrainConfig& cfg);
ModelSnapshot train(const ModelSnapshot& model, const LabeledDataset& data, const TrainConfig& cfg);

struct Gradients {
  std::vector<std::vector<double>> weights;  // per layer; empty for parameter-free layers
  std::vector<std::vector<double>> bias;
};

/// Analytic gradient of the batch-mean cross-entropy, in double precision.
Gradients compute_gradients(const ModelSnapshot& model, const LabeledDataset& batch);

/// Largest relative error between analytic gradients and central finite
/// differences over every parameter. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4); the floor keeps
/// near-zero gradients from amplifying finite-difference truncation error.
double gradient_check(const ModelSnapshot& model, const LabeledDataset& batch, double step = 1e-4);

// ---- surgery ----------------------------------------------------------------

/// Appends one zero-initialised output unit to the final dense layer.
ModelSnapshot extend_output_class(const ModelSnapshot& model);

/// Zeroes the floor(rate * weight_count) smallest-|w| weights across all
/// layers (biases untouched); ties go to the lower (layer, flat index).
ModelSnapshot global_magnitude_prune(const ModelSnapshot& model, double rate);

std::size_t count_nonzero_weights(const ModelSnapshot& model);

// ---- persistence -------------------------------------------------------------

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// "TNN1" | u16 version | shape + class count | layer table with float32
/// payloads | u32 CRC-32 of all preceding bytes. Little-endian throughout.
std::vector<std::uint8_t> encode_model(const ModelSnapshot& model);
ModelSnapshot decode_model(std::span<const std::uint8_t> bytes);
void save(const ModelSnapshot& model, const std::filesystem::path& path);
ModelSnapshot load(const std::filesystem::path& path);

/// IDX pair (0x00000803 images, 0x00000801 labels); pixels scaled to [0, 1].
/// num_classes is 1 + the largest label, and at least `min_classes`.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        int min_classes = 10);
LabeledDataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                          int min_classes = 10);
/// Writes single-channel datasets; values are rounded to bytes via x * 255.
void write_idx(const LabeledDataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

}  // namespace tracemark::nn
