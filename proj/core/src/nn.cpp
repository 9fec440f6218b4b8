#include "tracemark/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "tracemark/error.hpp"
#include "tracemark/random.hpp"

namespace tracemark::nn {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

Layer conv2d(int out_channels, int kernel, int stride) {
  Layer l;
  l.kind = LayerKind::kConv2d;
  l.out = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

Layer max_pool(int window) {
  Layer l;
  l.kind = LayerKind::kMaxPool;
  l.window = window;
  return l;
}

Layer dense(int out) {
  Layer l;
  l.kind = LayerKind::kDense;
  l.out = out;
  return l;
}

Layer relu() { return Layer{}; }

namespace {

Shape output_shape(const Layer& l, const Shape& in, std::size_t index) {
  const auto where = "layer " + std::to_string(index) + ": ";
  switch (l.kind) {
    case LayerKind::kConv2d: {
      if (l.out <= 0 || l.kernel <= 0 || l.stride <= 0) fail(ErrorCode::kInvalidInput, where + "bad conv parameters");
      if (in.height < l.kernel || in.width < l.kernel) {
        fail(ErrorCode::kInvalidInput, where + "kernel larger than input " + to_string(in));
      }
      return {l.out, (in.height - l.kernel) / l.stride + 1, (in.width - l.kernel) / l.stride + 1};
    }
    case LayerKind::kMaxPool: {
      if (l.window <= 0 || in.height < l.window || in.width < l.window) {
        fail(ErrorCode::kInvalidInput, where + "bad pooling window for " + to_string(in));
      }
      return {in.channels, in.height / l.window, in.width / l.window};
    }
    case LayerKind::kDense:
      if (l.out <= 0) fail(ErrorCode::kInvalidInput, where + "dense width must be positive");
      return {l.out, 1, 1};
    case LayerKind::kRelu:
      return in;
  }
  fail(ErrorCode::kInvalidInput, where + "unknown layer kind");
}

std::size_t expected_weights(const Layer& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::kConv2d: return static_cast<std::size_t>(l.out) * in.channels * l.kernel * l.kernel;
    case LayerKind::kDense: return static_cast<std::size_t>(l.out) * in.size();
    default: return 0;
  }
}

}  // namespace

std::vector<Shape> ModelSnapshot::layer_shapes() const {
  if (input.size() == 0 || input.channels <= 0 || input.height <= 0 || input.width <= 0) {
    fail(ErrorCode::kInvalidInput, "model input shape is empty");
  }
  if (layers.empty() || layers.back().kind != LayerKind::kDense) {
    fail(ErrorCode::kUnsupportedArchitecture, "the final layer must be dense");
  }
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const Shape next = output_shape(l, cur, i);
    if (l.has_params()) {
      if (l.weights.size() != expected_weights(l, cur) || l.bias.size() != static_cast<std::size_t>(l.out)) {
        fail(ErrorCode::kInvalidInput, "layer " + std::to_string(i) + ": parameter count does not match shape");
      }
    } else if (!l.weights.empty() || !l.bias.empty()) {
      fail(ErrorCode::kInvalidInput, "layer " + std::to_string(i) + ": unexpected parameters");
    }
    shapes.push_back(next);
    cur = next;
  }
  if (static_cast<int>(cur.size()) != num_classes) {
    fail(ErrorCode::kInvalidInput, "final layer width " + std::to_string(cur.size()) +
                                       " does not match num_classes " + std::to_string(num_classes));
  }
  return shapes;
}

std::size_t ModelSnapshot::weight_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size();
  return n;
}

std::size_t ModelSnapshot::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

ModelSnapshot build_model(Shape input, std::vector<Layer> layers, std::uint64_t seed) {
  ModelSnapshot m;
  m.input = input;
  SplitMix64 rng(seed);
  Shape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    l.weights.clear();
    l.bias.clear();
    const Shape next = output_shape(l, cur, i);
    if (l.has_params()) {
      double fan_in, fan_out;
      if (l.kind == LayerKind::kConv2d) {
        fan_in = static_cast<double>(cur.channels) * l.kernel * l.kernel;
        fan_out = static_cast<double>(l.out) * l.kernel * l.kernel;
      } else {
        fan_in = static_cast<double>(cur.size());
        fan_out = l.out;
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      l.weights.resize(expected_weights(l, cur));
      for (float& w : l.weights) w = static_cast<float>(rng.uniform(-limit, limit));
      l.bias.assign(static_cast<std::size_t>(l.out), 0.0f);
    }
    cur = next;
  }
  m.layers = std::move(layers);
  m.num_classes = static_cast<int>(cur.size());
  m.layer_shapes();
  return m;
}

ModelSnapshot desk_cnn(Shape input, int num_classes, std::uint64_t seed) {
  return build_model(input,
                     {conv2d(8, 5), relu(), max_pool(2), conv2d(16, 5), relu(), max_pool(2), dense(64), relu(),
                      dense(num_classes)},
                     seed);
}

void LabeledDataset::add(std::span<const float> x, int label) {
  if (x.size() != shape.size()) fail(ErrorCode::kInvalidInput, "dataset item has wrong size");
  inputs.insert(inputs.end(), x.begin(), x.end());
  labels.push_back(label);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.shape = shape;
  out.num_classes = num_classes;
  out.inputs.reserve(indices.size() * shape.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.add(input(i), labels[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Engine: one sample at a time, activations cached for the backward pass.

namespace {

template <typename T>
class Engine {
 public:
  explicit Engine(const ModelSnapshot& m) : layers_(&m.layers), input_(m.input), shapes_(m.layer_shapes()) {
    const std::size_t n = m.layers.size();
    w_.resize(n);
    b_.resize(n);
    gw_.resize(n);
    gb_.resize(n);
    acts_.resize(n + 1);
    deltas_.resize(n + 1);
    argmax_.resize(n);
    acts_[0].resize(input_.size());
    deltas_[0].resize(input_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Layer& l = m.layers[i];
      w_[i].assign(l.weights.begin(), l.weights.end());
      b_[i].assign(l.bias.begin(), l.bias.end());
      gw_[i].assign(w_[i].size(), T{0});
      gb_[i].assign(b_[i].size(), T{0});
      acts_[i + 1].resize(shapes_[i].size());
      deltas_[i + 1].resize(shapes_[i].size());
      if (l.kind == LayerKind::kMaxPool) argmax_[i].resize(shapes_[i].size());
    }
  }

  std::size_t layer_count() const { return w_.size(); }
  std::vector<T>& weights(std::size_t i) { return w_[i]; }
  std::vector<T>& bias(std::size_t i) { return b_[i]; }
  const std::vector<T>& weight_grad(std::size_t i) const { return gw_[i]; }
  const std::vector<T>& bias_grad(std::size_t i) const { return gb_[i]; }
  std::vector<T>& weight_grad(std::size_t i) { return gw_[i]; }
  std::vector<T>& bias_grad(std::size_t i) { return gb_[i]; }

  std::span<const T> forward(std::span<const float> x) {
    if (x.size() != input_.size()) {
      fail(ErrorCode::kInvalidInput, "input has " + std::to_string(x.size()) + " values, model expects " +
                                         to_string(input_));
    }
    std::copy(x.begin(), x.end(), acts_[0].begin());
    Shape in = input_;
    for (std::size_t i = 0; i < layer_count(); ++i) {
      const Layer& l = (*layers_)[i];
      const Shape& out = shapes_[i];
      switch (l.kind) {
        case LayerKind::kConv2d: conv_forward(i, l, in, out); break;
        case LayerKind::kMaxPool: pool_forward(i, l, in, out); break;
        case LayerKind::kDense: dense_forward(i, in, out); break;
        case LayerKind::kRelu: {
          const auto& src = acts_[i];
          auto& dst = acts_[i + 1];
          for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] > T{0} ? src[k] : T{0};
          break;
        }
      }
      in = out;
    }
    return acts_.back();
  }

  // Accumulates parameter gradients for the sample last passed to forward().
  void backward(std::span<const T> dlogits) {
    std::copy(dlogits.begin(), dlogits.end(), deltas_.back().begin());
    for (std::size_t i = layer_count(); i-- > 0;) {
      const Layer& l = (*layers_)[i];
      const Shape in = i == 0 ? input_ : shapes_[i - 1];
      const Shape& out = shapes_[i];
      const bool need_input_grad = i > 0;
      switch (l.kind) {
        case LayerKind::kConv2d: conv_backward(i, l, in, out, need_input_grad); break;
        case LayerKind::kMaxPool: {
          auto& gin = deltas_[i];
          std::fill(gin.begin(), gin.end(), T{0});
          const auto& gout = deltas_[i + 1];
          for (std::size_t k = 0; k < gout.size(); ++k) gin[argmax_[i][k]] += gout[k];
          break;
        }
        case LayerKind::kDense: dense_backward(i, in, out, need_input_grad); break;
        case LayerKind::kRelu: {
          const auto& act = acts_[i];
          const auto& gout = deltas_[i + 1];
          auto& gin = deltas_[i];
          for (std::size_t k = 0; k < gout.size(); ++k) gin[k] = act[k] > T{0} ? gout[k] : T{0};
          break;
        }
      }
    }
  }

  void zero_grad() {
    for (auto& g : gw_) std::fill(g.begin(), g.end(), T{0});
    for (auto& g : gb_) std::fill(g.begin(), g.end(), T{0});
  }

  ModelSnapshot export_to(const ModelSnapshot& tmpl) const {
    ModelSnapshot m = tmpl;
    for (std::size_t i = 0; i < layer_count(); ++i) {
      std::transform(w_[i].begin(), w_[i].end(), m.layers[i].weights.begin(), [](T v) { return static_cast<float>(v); });
      std::transform(b_[i].begin(), b_[i].end(), m.layers[i].bias.begin(), [](T v) { return static_cast<float>(v); });
    }
    return m;
  }

 private:
  void conv_forward(std::size_t i, const Layer& l, const Shape& in, const Shape& out) {
    const T* src = acts_[i].data();
    T* dst = acts_[i + 1].data();
    const int k = l.kernel, s = l.stride;
    const std::size_t in_plane = static_cast<std::size_t>(in.height) * in.width;
    const std::size_t out_plane = static_cast<std::size_t>(out.height) * out.width;
    const T* wt = w_[i].data();
    for (int o = 0; o < out.channels; ++o) {
      T* dst_o = dst + o * out_plane;
      std::fill(dst_o, dst_o + out_plane, b_[i][o]);
      for (int c = 0; c < in.channels; ++c) {
        const T* src_c = src + c * in_plane;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = wt[((static_cast<std::size_t>(o) * in.channels + c) * k + ky) * k + kx];
            for (int oy = 0; oy < out.height; ++oy) {
              const T* row = src_c + static_cast<std::size_t>(oy * s + ky) * in.width + kx;
              T* drow = dst_o + static_cast<std::size_t>(oy) * out.width;
              if (s == 1) {
                for (int ox = 0; ox < out.width; ++ox) drow[ox] += wv * row[ox];
              } else {
                for (int ox = 0; ox < out.width; ++ox) drow[ox] += wv * row[ox * s];
              }
            }
          }
        }
      }
    }
  }

  void conv_backward(std::size_t i, const Layer& l, const Shape& in, const Shape& out, bool need_input_grad) {
    const T* src = acts_[i].data();
    const T* gout = deltas_[i + 1].data();
    T* gin = deltas_[i].data();
    if (need_input_grad) std::fill(deltas_[i].begin(), deltas_[i].end(), T{0});
    const int k = l.kernel, s = l.stride;
    const std::size_t in_plane = static_cast<std::size_t>(in.height) * in.width;
    const std::size_t out_plane = static_cast<std::size_t>(out.height) * out.width;
    const T* wt = w_[i].data();
    T* gw = gw_[i].data();
    for (int o = 0; o < out.channels; ++o) {
      const T* g_o = gout + o * out_plane;
      T bsum{0};
      for (std::size_t p = 0; p < out_plane; ++p) bsum += g_o[p];
      gb_[i][o] += bsum;
      for (int c = 0; c < in.channels; ++c) {
        const T* src_c = src + c * in_plane;
        T* gin_c = gin + c * in_plane;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((static_cast<std::size_t>(o) * in.channels + c) * k + ky) * k + kx;
            const T wv = wt[widx];
            T acc{0};
            for (int oy = 0; oy < out.height; ++oy) {
              const std::size_t off = static_cast<std::size_t>(oy * s + ky) * in.width + kx;
              const T* row = src_c + off;
              const T* grow = g_o + static_cast<std::size_t>(oy) * out.width;
              if (s == 1) {
                for (int ox = 0; ox < out.width; ++ox) acc += grow[ox] * row[ox];
                if (need_input_grad) {
                  T* girow = gin_c + off;
                  for (int ox = 0; ox < out.width; ++ox) girow[ox] += wv * grow[ox];
                }
              } else {
                for (int ox = 0; ox < out.width; ++ox) acc += grow[ox] * row[ox * s];
                if (need_input_grad) {
                  T* girow = gin_c + off;
                  for (int ox = 0; ox < out.width; ++ox) girow[ox * s] += wv * grow[ox];
                }
              }
            }
            gw[widx] += acc;
          }
        }
      }
    }
  }

  void pool_forward(std::size_t i, const Layer& l, const Shape& in, const Shape& out) {
    const auto& src = acts_[i];
    auto& dst = acts_[i + 1];
    const int win = l.window;
    for (int c = 0; c < out.channels; ++c) {
      for (int oy = 0; oy < out.height; ++oy) {
        for (int ox = 0; ox < out.width; ++ox) {
          std::size_t best = (static_cast<std::size_t>(c) * in.height + oy * win) * in.width + ox * win;
          for (int dy = 0; dy < win; ++dy) {
            for (int dx = 0; dx < win; ++dx) {
              const std::size_t idx = (static_cast<std::size_t>(c) * in.height + oy * win + dy) * in.width + ox * win + dx;
              if (src[idx] > src[best]) best = idx;
            }
          }
          const std::size_t o = (static_cast<std::size_t>(c) * out.height + oy) * out.width + ox;
          dst[o] = src[best];
          argmax_[i][o] = best;
        }
      }
    }
  }

  void dense_forward(std::size_t i, const Shape& in, const Shape& out) {
    const std::size_t n_in = in.size();
    const T* x = acts_[i].data();
    const T* wt = w_[i].data();
    for (int j = 0; j < out.channels; ++j) {
      const T* row = wt + static_cast<std::size_t>(j) * n_in;
      T acc{0};
      for (std::size_t k = 0; k < n_in; ++k) acc += row[k] * x[k];
      acts_[i + 1][j] = acc + b_[i][j];
    }
  }

  void dense_backward(std::size_t i, const Shape& in, const Shape& out, bool need_input_grad) {
    const std::size_t n_in = in.size();
    const T* x = acts_[i].data();
    const T* g = deltas_[i + 1].data();
    T* gin = deltas_[i].data();
    if (need_input_grad) std::fill(deltas_[i].begin(), deltas_[i].end(), T{0});
    for (int j = 0; j < out.channels; ++j) {
      const T gj = g[j];
      gb_[i][j] += gj;
      if (gj == T{0}) continue;
      T* gw = gw_[i].data() + static_cast<std::size_t>(j) * n_in;
      const T* row = w_[i].data() + static_cast<std::size_t>(j) * n_in;
      for (std::size_t k = 0; k < n_in; ++k) gw[k] += gj * x[k];
      if (need_input_grad) {
        for (std::size_t k = 0; k < n_in; ++k) gin[k] += gj * row[k];
      }
    }
  }

  const std::vector<Layer>* layers_;
  Shape input_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<T>> w_, b_, gw_, gb_;
  std::vector<std::vector<T>> acts_, deltas_;
  std::vector<std::vector<std::size_t>> argmax_;
};

// Cross-entropy on logits: returns the loss and writes softmax - onehot,
// scaled by `scale`, into `dlogits`.
template <typename T>
double softmax_xent(std::span<const T> z, int label, double scale, std::vector<T>& dlogits) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (T v : z) sum += std::exp(static_cast<double>(v) - zmax);
  const double lse = zmax + std::log(sum);
  dlogits.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double p = std::exp(static_cast<double>(z[k]) - lse);
    dlogits[k] = static_cast<T>(scale * (p - (static_cast<int>(k) == label ? 1.0 : 0.0)));
  }
  return lse - static_cast<double>(z[static_cast<std::size_t>(label)]);
}

template <typename T>
double xent(std::span<const T> z, int label) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (T v : z) sum += std::exp(static_cast<double>(v) - zmax);
  return zmax + std::log(sum) - static_cast<double>(z[static_cast<std::size_t>(label)]);
}

void check_labels(const ModelSnapshot& model, const LabeledDataset& data) {
  if (data.shape != model.input) {
    fail(ErrorCode::kInvalidInput, "dataset shape " + to_string(data.shape) + " does not match model input " +
                                       to_string(model.input));
  }
  for (int y : data.labels) {
    if (y < 0 || y >= model.num_classes) {
      fail(ErrorCode::kInvalidInput, "label " + std::to_string(y) + " outside model classes");
    }
  }
}

template <typename T>
double batch_loss(Engine<T>& eng, const LabeledDataset& batch) {
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) total += xent(eng.forward(batch.input(n)), batch.labels[n]);
  return total / static_cast<double>(batch.size());
}

int argmax(std::span<const float> z, int classes) {
  const int n = classes > 0 ? std::min<int>(classes, static_cast<int>(z.size())) : static_cast<int>(z.size());
  return static_cast<int>(std::max_element(z.begin(), z.begin() + n) - z.begin());
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += p[k] = std::exp(z[k] - zmax);
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> logits(const ModelSnapshot& model, std::span<const float> x) {
  Engine<float> eng(model);
  auto z = eng.forward(x);
  return {z.begin(), z.end()};
}

std::vector<double> forward(const ModelSnapshot& model, std::span<const float> x) {
  const auto z = logits(model, x);
  return softmax(z);
}

int predict(const ModelSnapshot& model, std::span<const float> x, int classes) {
  Engine<float> eng(model);
  return argmax(eng.forward(x), classes);
}

double accuracy(const ModelSnapshot& model, const LabeledDataset& data, int classes) {
  if (data.size() == 0) return 0.0;
  if (data.shape != model.input) fail(ErrorCode::kInvalidInput, "dataset shape does not match model input");
  Engine<float> eng(model);
  std::size_t hits = 0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (argmax(eng.forward(data.input(n)), classes) == data.labels[n]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double mean_loss(const ModelSnapshot& model, const LabeledDataset& data) {
  check_labels(model, data);
  if (data.size() == 0) return 0.0;
  Engine<float> eng(model);
  return batch_loss(eng, data);
}

TrainResult train_with_history(const ModelSnapshot& model, const LabeledDataset& data, const TrainConfig& cfg) {
  if (cfg.epochs < 1) fail(ErrorCode::kInvalidInput, "train: epochs must be >= 1");
  if (cfg.batch_size < 1) fail(ErrorCode::kInvalidInput, "train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorCode::kInvalidInput, "train: learning rate must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) fail(ErrorCode::kInvalidInput, "train: momentum must be in [0,1)");
  if (data.num_classes != model.num_classes) {
    fail(ErrorCode::kInvalidInput, "train: dataset has " + std::to_string(data.num_classes) +
                                       " classes, model has " + std::to_string(model.num_classes));
  }
  if (data.size() == 0) fail(ErrorCode::kInvalidInput, "train: empty dataset");
  check_labels(model, data);

  Engine<float> eng(model);
  const std::size_t layers = eng.layer_count();
  std::vector<std::vector<float>> vw(layers), vb(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    vw[i].assign(eng.weights(i).size(), 0.0f);
    vb[i].assign(eng.bias(i).size(), 0.0f);
  }
  const float lr = static_cast<float>(cfg.learning_rate);
  const float mu = static_cast<float>(cfg.momentum);

  SplitMix64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> dlogits;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      eng.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t n = order[k];
        const auto z = eng.forward(data.input(n));
        epoch_total += softmax_xent<float>(z, data.labels[n], scale, dlogits);
        eng.backward(dlogits);
      }
      if (!std::isfinite(epoch_total)) {
        fail(ErrorCode::kDivergence, "train: loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      for (std::size_t i = 0; i < layers; ++i) {
        auto& w = eng.weights(i);
        const auto& g = eng.weight_grad(i);
        for (std::size_t p = 0; p < w.size(); ++p) {
          vw[i][p] = mu * vw[i][p] + g[p];
          w[p] -= lr * vw[i][p];
        }
        auto& b = eng.bias(i);
        const auto& gb = eng.bias_grad(i);
        for (std::size_t p = 0; p < b.size(); ++p) {
          vb[i][p] = mu * vb[i][p] + gb[p];
          b[p] -= lr * vb[i][p];
        }
      }
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));
  }
  result.model = eng.export_to(model);
  return result;
}

ModelSnapshot train(const ModelSnapshot& model, const LabeledDataset& data, const TrainConfig& cfg) {
  return train_with_history(model, data, cfg).model;
}

Gradients compute_gradients(const ModelSnapshot& model, const LabeledDataset& batch) {
  check_labels(model, batch);
  if (batch.size() == 0) fail(ErrorCode::kInvalidInput, "compute_gradients: empty batch");
  Engine<double> eng(model);
  eng.zero_grad();
  std::vector<double> dlogits;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto z = eng.forward(batch.input(n));
    softmax_xent<double>(z, batch.labels[n], scale, dlogits);
    eng.backward(dlogits);
  }
  Gradients g;
  for (std::size_t i = 0; i < eng.layer_count(); ++i) {
    g.weights.push_back(eng.weight_grad(i));
    g.bias.push_back(eng.bias_grad(i));
  }
  return g;
}

double gradient_check(const ModelSnapshot& model, const LabeledDataset& batch, double step) {
  const Gradients analytic = compute_gradients(model, batch);
  Engine<double> eng(model);
  double worst = 0.0;
  auto probe = [&](double& param, double grad) {
    const double saved = param;
    param = saved + step;
    const double up = batch_loss(eng, batch);
    param = saved - step;
    const double down = batch_loss(eng, batch);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(grad), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(grad - numeric) / denom);
  };
  for (std::size_t i = 0; i < eng.layer_count(); ++i) {
    auto& w = eng.weights(i);
    for (std::size_t p = 0; p < w.size(); ++p) probe(w[p], analytic.weights[i][p]);
    auto& b = eng.bias(i);
    for (std::size_t p = 0; p < b.size(); ++p) probe(b[p], analytic.bias[i][p]);
  }
  return worst;
}

ModelSnapshot extend_output_class(const ModelSnapshot& model) {
  if (model.layers.empty() || model.layers.back().kind != LayerKind::kDense) {
    fail(ErrorCode::kUnsupportedArchitecture, "extend_output_class: final layer is not dense");
  }
  const auto shapes = model.layer_shapes();
  const Shape in = shapes.size() >= 2 ? shapes[shapes.size() - 2] : model.input;
  ModelSnapshot out = model;
  Layer& last = out.layers.back();
  last.weights.insert(last.weights.end(), in.size(), 0.0f);
  last.bias.push_back(0.0f);
  last.out += 1;
  out.num_classes += 1;
  return out;
}

ModelSnapshot global_magnitude_prune(const ModelSnapshot& model, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) fail(ErrorCode::kInvalidInput, "prune rate must be in [0, 1]");
  const std::size_t total = model.weight_count();
  const auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(total)));
  ModelSnapshot out = model;
  if (k == 0) return out;

  struct Entry {
    float magnitude;
    std::uint32_t layer;
    std::uint32_t index;
  };
  std::vector<Entry> entries;
  entries.reserve(total);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& w = model.layers[l].weights;
    for (std::size_t p = 0; p < w.size(); ++p) {
      entries.push_back({std::abs(w[p]), static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(p)});
    }
  }
  auto before = [](const Entry& a, const Entry& b) {
    return std::tie(a.magnitude, a.layer, a.index) < std::tie(b.magnitude, b.layer, b.index);
  };
  if (k < entries.size()) std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k), entries.end(), before);
  for (std::size_t n = 0; n < k; ++n) out.layers[entries[n].layer].weights[entries[n].index] = 0.0f;
  return out;
}

std::size_t count_nonzero_weights(const ModelSnapshot& model) {
  std::size_t n = 0;
  for (const Layer& l : model.layers) n += static_cast<std::size_t>(std::count_if(l.weights.begin(), l.weights.end(), [](float w) { return w != 0.0f; }));
  return n;
}

}  // namespace tracemark::nn
