#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sgap/error.hpp"
#include "sgap/rng.hpp"
#include "sgap/tensor.hpp"

namespace sgap {

// Fully connected layer: y = x W^T + b, weight is [out_dim, in_dim].
struct Dense {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool has_bias = true;
  Tensor weight;
  Tensor bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out, bool with_bias = true)
      : in_dim(in), out_dim(out), has_bias(with_bias), weight({out, in}) {
    if (with_bias) bias = Tensor({out});
  }
};

struct Relu {};

struct Layer;

// out = x + inner(x); inner must map width d back to width d.
struct ResidualBlock {
  std::vector<Layer> inner;
};

// Loss head. It is the identity in forward; backward turns the targets into
// d(mean cross-entropy)/d(logits).
struct SoftmaxCrossEntropy {
  std::size_t num_classes = 0;
};

struct Layer {
  std::variant<Dense, Relu, ResidualBlock, SoftmaxCrossEntropy> kind;

  template <class T>
    requires(!std::is_same_v<std::decay_t<T>, Layer>)
  Layer(T value) : kind(std::move(value)) {}  // NOLINT(google-explicit-constructor)

  const char* kind_name() const {
    return std::visit(
        [](const auto& l) -> const char* {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Dense>) return "dense";
          if constexpr (std::is_same_v<T, Relu>) return "relu";
          if constexpr (std::is_same_v<T, ResidualBlock>) return "residual";
          if constexpr (std::is_same_v<T, SoftmaxCrossEntropy>)
            return "softmax_ce";
        },
        kind);
  }
};

// One entry of the parameter registry. Registry order is the depth-first
// order of the layer tree and is stable across copies and checkpoints.
struct ParamView {
  std::string name;
  Tensor* value = nullptr;
  bool prunable = false;  // weight matrices only, never biases
};

struct ConstParamView {
  std::string name;
  const Tensor* value = nullptr;
  bool prunable = false;
};

// Activations recorded by a forward pass, consumed in reverse by backward.
struct Tape {
  std::vector<Tensor> entries;
  Tensor logits;
  std::size_t batch = 0;
  bool valid = false;

  void clear() {
    entries.clear();
    logits = Tensor();
    batch = 0;
    valid = false;
  }
};

struct Gradients {
  std::vector<Tensor> grads;  // registry order
  double loss = 0.0;          // mean cross-entropy over the batch
};

namespace detail {

inline std::string join_path(const std::string& prefix, std::size_t index) {
  return prefix + "." + std::to_string(index);
}

template <class LayerT, class Fn>
void visit_params(LayerT& layers, const std::string& prefix, Fn&& fn) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& layer = layers[i];
    const std::string path = join_path(prefix, i);
    if (auto* dense = std::get_if<Dense>(&layer.kind)) {
      fn(path + ".weight", dense->weight, true);
      if (dense->has_bias) fn(path + ".bias", dense->bias, false);
    } else if (auto* block = std::get_if<ResidualBlock>(&layer.kind)) {
      visit_params(block->inner, path + ".inner", fn);
    }
  }
}

inline std::size_t param_count(const Layer& layer) {
  if (auto* dense = std::get_if<Dense>(&layer.kind)) {
    return dense->has_bias ? 2 : 1;
  }
  if (auto* block = std::get_if<ResidualBlock>(&layer.kind)) {
    std::size_t n = 0;
    for (const auto& l : block->inner) n += param_count(l);
    return n;
  }
  return 0;
}

// Validates a layer sequence, returning the output width.
inline std::size_t check_layers(const std::vector<Layer>& layers,
                                std::size_t width, const std::string& prefix,
                                bool top_level) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    const std::string where =
        "layer " + join_path(prefix, i) + " (" + layer.kind_name() + ")";
    if (auto* dense = std::get_if<Dense>(&layer.kind)) {
      if (dense->in_dim == 0 || dense->out_dim == 0) {
        throw ShapeError(where + ": dimensions must be positive");
      }
      if (dense->in_dim != width) {
        throw ShapeError(where + ": expects input width " +
                         std::to_string(dense->in_dim) + " but receives " +
                         std::to_string(width));
      }
      if (dense->weight.shape() != Shape{dense->out_dim, dense->in_dim}) {
        throw ShapeError(where + ": weight shape " +
                         shape_string(dense->weight.shape()));
      }
      if (dense->has_bias && dense->bias.shape() != Shape{dense->out_dim}) {
        throw ShapeError(where + ": bias shape " +
                         shape_string(dense->bias.shape()));
      }
      width = dense->out_dim;
    } else if (auto* block = std::get_if<ResidualBlock>(&layer.kind)) {
      const auto out =
          check_layers(block->inner, width, join_path(prefix, i) + ".inner",
                       false);
      if (out != width) {
        throw ShapeError(where + ": inner path maps width " +
                         std::to_string(width) + " to " + std::to_string(out));
      }
    } else if (auto* head = std::get_if<SoftmaxCrossEntropy>(&layer.kind)) {
      if (!top_level || i + 1 != layers.size()) {
        throw ShapeError(where + ": loss head must be the final layer");
      }
      if (head->num_classes != width) {
        throw ShapeError(where + ": " + std::to_string(head->num_classes) +
                         " classes but incoming width " +
                         std::to_string(width));
      }
    }
  }
  return width;
}

inline Tensor dense_forward(const Dense& layer, const Tensor& x) {
  const std::size_t batch = x.dim(0);
  const std::size_t in = layer.in_dim;
  const std::size_t out = layer.out_dim;
  // Transposed copy so the inner loop is a contiguous axpy.
  std::vector<float> wt(in * out);
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = layer.weight[o * in + i];
  }
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    float* yr = y.data().data() + b * out;
    if (layer.has_bias) {
      std::copy_n(layer.bias.data().data(), out, yr);
    }
    const float* xr = x.data().data() + b * in;
    for (std::size_t i = 0; i < in; ++i) {
      const float xi = xr[i];
      if (xi == 0.0f) continue;
      const float* wr = wt.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  }
  return y;
}

// Returns d(loss)/d(input) and writes the parameter gradients.
inline Tensor dense_backward(const Dense& layer, const Tensor& x,
                             const Tensor& grad_out, Tensor& grad_weight,
                             Tensor* grad_bias) {
  const std::size_t batch = x.dim(0);
  const std::size_t in = layer.in_dim;
  const std::size_t out = layer.out_dim;
  grad_weight = Tensor({out, in});
  if (grad_bias) *grad_bias = Tensor({out});
  Tensor grad_in({batch, in});
  for (std::size_t b = 0; b < batch; ++b) {
    const float* xr = x.data().data() + b * in;
    const float* gr = grad_out.data().data() + b * out;
    float* gi = grad_in.data().data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const float g = gr[o];
      if (g == 0.0f) continue;
      if (grad_bias) (*grad_bias)[o] += g;
      float* gw = grad_weight.data().data() + o * in;
      const float* wr = layer.weight.data().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g * xr[i];
        gi[i] += g * wr[i];
      }
    }
  }
  return grad_in;
}

inline Tensor run_forward(const std::vector<Layer>& layers, Tensor x,
                          Tape* tape) {
  for (const auto& layer : layers) {
    if (auto* dense = std::get_if<Dense>(&layer.kind)) {
      Tensor y = dense_forward(*dense, x);
      if (tape) tape->entries.push_back(std::move(x));
      x = std::move(y);
    } else if (std::holds_alternative<Relu>(layer.kind)) {
      for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
      if (tape) tape->entries.push_back(x);
    } else if (auto* block = std::get_if<ResidualBlock>(&layer.kind)) {
      Tensor inner = run_forward(block->inner, x, tape);
      auto xs = x.data();
      auto is = inner.data();
      for (std::size_t k = 0; k < xs.size(); ++k) xs[k] += is[k];
    }
  }
  return x;
}

// Walks layers in reverse; param_end is one past the last registry slot owned
// by this sequence.
inline Tensor run_backward(const std::vector<Layer>& layers, Tensor grad,
                           Tape& tape, std::vector<Tensor>& grads,
                           std::size_t param_end) {
  std::size_t slot = param_end;
  for (std::size_t idx = layers.size(); idx-- > 0;) {
    const auto& layer = layers[idx];
    if (auto* dense = std::get_if<Dense>(&layer.kind)) {
      Tensor x = std::move(tape.entries.back());
      tape.entries.pop_back();
      slot -= dense->has_bias ? 2 : 1;
      Tensor* gb = dense->has_bias ? &grads[slot + 1] : nullptr;
      grad = dense_backward(*dense, x, grad, grads[slot], gb);
    } else if (std::holds_alternative<Relu>(layer.kind)) {
      const Tensor y = std::move(tape.entries.back());
      tape.entries.pop_back();
      auto gs = grad.data();
      auto ys = y.data();
      for (std::size_t k = 0; k < gs.size(); ++k) {
        if (!(ys[k] > 0.0f)) gs[k] = 0.0f;
      }
    } else if (auto* block = std::get_if<ResidualBlock>(&layer.kind)) {
      Tensor inner = run_backward(block->inner, grad, tape, grads, slot);
      slot -= param_count(layer);
      auto gs = grad.data();
      auto is = inner.data();
      for (std::size_t k = 0; k < gs.size(); ++k) gs[k] += is[k];
    }
  }
  return grad;
}

}  // namespace detail

// Ordered layer graph holding the trainable parameters.
class Model {
 public:
  Model() = default;

  explicit Model(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("model has no layers");
    const auto* first = std::get_if<Dense>(&layers_.front().kind);
    if (!first) throw ShapeError("layer .0: first layer must be dense");
    input_dim_ = first->in_dim;
    const auto* head = std::get_if<SoftmaxCrossEntropy>(&layers_.back().kind);
    if (!head) {
      throw ShapeError("model must end in a softmax_ce loss head");
    }
    num_classes_ = head->num_classes;
    detail::check_layers(layers_, input_dim_, "", true);
  }

  Model(const Model& other) : layers_(other.layers_),
                              input_dim_(other.input_dim_),
                              num_classes_(other.num_classes_) {}
  Model& operator=(const Model& other) {
    if (this != &other) {
      layers_ = other.layers_;
      input_dim_ = other.input_dim_;
      num_classes_ = other.num_classes_;
      tape_.clear();
    }
    return *this;
  }
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<ParamView> parameters() {
    std::vector<ParamView> out;
    detail::visit_params(layers_, "layers",
                         [&](std::string name, Tensor& t, bool prunable) {
                           out.push_back({std::move(name), &t, prunable});
                         });
    return out;
  }

  std::vector<ConstParamView> parameters() const {
    std::vector<ConstParamView> out;
    detail::visit_params(layers_, "layers",
                         [&](std::string name, const Tensor& t, bool prunable) {
                           out.push_back({std::move(name), &t, prunable});
                         });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
  }

  // Logits for a [B, input_dim] batch; records the tape for backward.
  Tensor forward(const Tensor& batch_inputs) {
    tape_.clear();
    Tensor logits = run(batch_inputs, &tape_);
    tape_.batch = batch_inputs.dim(0);
    tape_.logits = logits;
    tape_.valid = true;
    return logits;
  }

  // Same as forward but leaves no tape behind.
  Tensor logits(const Tensor& batch_inputs) const {
    return run(batch_inputs, nullptr);
  }

  // Mean-over-batch gradients for every registered parameter plus the mean
  // cross-entropy loss. Consumes the tape of the preceding forward.
  Gradients backward(std::span<const int> targets) {
    if (!tape_.valid) {
      throw Error("backward called without a matching forward");
    }
    const std::size_t batch = tape_.batch;
    if (targets.size() != batch) {
      throw ShapeError("backward: " + std::to_string(targets.size()) +
                       " targets for a batch of " + std::to_string(batch));
    }
    Gradients out;
    Tensor grad_logits({batch, num_classes_});
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const int y = targets[b];
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
        throw DataError("backward: target " + std::to_string(y) +
                        " out of range [0, " + std::to_string(num_classes_) +
                        ")");
      }
      auto z = tape_.logits.row(b);
      const double zmax = *std::max_element(z.begin(), z.end());
      double denom = 0.0;
      for (float v : z) denom += std::exp(static_cast<double>(v) - zmax);
      const double log_denom = std::log(denom);
      loss += log_denom + zmax - static_cast<double>(z[y]);
      auto g = grad_logits.row(b);
      for (std::size_t k = 0; k < num_classes_; ++k) {
        double p = std::exp(static_cast<double>(z[k]) - zmax - log_denom);
        if (static_cast<int>(k) == y) p -= 1.0;
        g[k] = static_cast<float>(p / static_cast<double>(batch));
      }
    }
    out.loss = loss / static_cast<double>(batch);

    std::size_t total = 0;
    for (const auto& l : layers_) total += detail::param_count(l);
    out.grads.resize(total);
    detail::run_backward(layers_, std::move(grad_logits), tape_, out.grads,
                         total);
    tape_.clear();
    return out;
  }

 private:
  Tensor run(const Tensor& x, Tape* tape) const {
    if (x.rank() != 2 || x.dim(1) != input_dim_) {
      throw ShapeError("layer .0 (dense): batch input shape " +
                       shape_string(x.shape()) + " does not match [B, " +
                       std::to_string(input_dim_) + "]");
    }
    Tensor logits = detail::run_forward(layers_, x, tape);
    if (!logits.all_finite()) {
      throw DivergenceError("forward produced non-finite logits");
    }
    return logits;
  }

  std::vector<Layer> layers_;
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
  Tape tape_;
};

// Argmax with ties going to the lowest index.
inline std::size_t argmax(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

inline std::vector<int> predict(const Model& model, const Tensor& features,
                                std::size_t chunk = 1024) {
  const std::size_t n = features.dim(0);
  const std::size_t d = features.dim(1);
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t rows = std::min(chunk, n - start);
    std::vector<float> block(features.data().begin() + start * d,
                             features.data().begin() + (start + rows) * d);
    const Tensor logits = model.logits(Tensor({rows, d}, std::move(block)));
    for (std::size_t r = 0; r < rows; ++r) {
      out.push_back(static_cast<int>(argmax(logits.row(r))));
    }
  }
  return out;
}

inline double eval_accuracy(const Model& model, const Tensor& features,
                            std::span<const int> labels) {
  if (labels.empty()) throw DataError("eval_accuracy: empty dataset");
  if (features.rank() != 2 || features.dim(0) != labels.size()) {
    throw ShapeError("eval_accuracy: features " +
                     shape_string(features.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const auto predicted = predict(model, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// He-uniform for weights (limit sqrt(6 / fan_in)), zero biases.
inline void init_he_uniform(Model& model, Rng& rng) {
  for (auto& p : model.parameters()) {
    if (!p.prunable) {
      p.value->fill(0.0f);
      continue;
    }
    const auto fan_in = static_cast<float>(p.value->dim(1));
    const float limit = std::sqrt(6.0f / fan_in);
    for (float& w : p.value->data()) w = rng.uniform(-limit, limit);
  }
}

// Residual MLP used by the experiments:
// dense(in, w) relu [residual(dense relu dense) relu] x blocks dense(w, K) loss
struct ModelSpec {
  std::size_t input_dim = 16;
  std::size_t width = 64;
  std::size_t blocks = 3;
  std::size_t classes = 10;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline Model build_residual_mlp(const ModelSpec& spec) {
  std::vector<Layer> layers;
  layers.emplace_back(Dense(spec.input_dim, spec.width));
  layers.emplace_back(Relu{});
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    ResidualBlock block;
    block.inner.emplace_back(Dense(spec.width, spec.width));
    block.inner.emplace_back(Relu{});
    block.inner.emplace_back(Dense(spec.width, spec.width));
    layers.emplace_back(std::move(block));
    layers.emplace_back(Relu{});
  }
  layers.emplace_back(Dense(spec.width, spec.classes));
  layers.emplace_back(SoftmaxCrossEntropy{spec.classes});
  return Model(std::move(layers));
}

}  // namespace sgap
