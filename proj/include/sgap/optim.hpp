#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgap/error.hpp"
#include "sgap/model.hpp"
#include "sgap/rng.hpp"
#include "sgap/tensor.hpp"

namespace sgap {

enum class OptimizerKind { kAdam, kStochGradAdam };

inline std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "stochgradadam";
}

inline OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "stochgradadam") return OptimizerKind::kStochGradAdam;
  throw ConfigError("unknown optimizer '" + name +
                    "' (expected adam or stochgradadam)");
}

// How StochGradAdam normalizes its moments.
//
// kCumulative divides by 1 - prod_{k<=t} beta * delta^k, the total weight a
// zero-initialized average with time-varying decay has accumulated. With
// delta = 1 this is exactly Adam's 1 - beta^t.
//
// kLiteral divides by 1 - beta * delta^t, i.e. the same decay factor used in
// the moment update. With delta = 1 this is the constant 1 - beta.
enum class BiasCorrection { kCumulative, kLiteral };

inline std::string to_string(BiasCorrection mode) {
  return mode == BiasCorrection::kCumulative ? "cumulative" : "literal";
}

inline BiasCorrection parse_bias_correction(const std::string& name) {
  if (name == "cumulative") return BiasCorrection::kCumulative;
  if (name == "literal") return BiasCorrection::kLiteral;
  throw ConfigError("unknown bias correction '" + name +
                    "' (expected cumulative or literal)");
}

// One learning-rate knob (mu) drives the update.
struct HyperParams {
  double mu = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1.0;  // global decay; 1 disables it
  double epsilon = 1e-7;
  double sampling_rate = 0.8;
  BiasCorrection bias_correction = BiasCorrection::kCumulative;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!(mu > 0.0)) fail("learning rate mu must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
    if (!(delta > 0.0 && delta <= 1.0)) fail("delta must lie in (0, 1]");
    if (!(epsilon > 0.0)) fail("epsilon must be > 0");
    if (!(sampling_rate >= 0.0 && sampling_rate <= 1.0)) {
      fail("sampling rate must lie in [0, 1]");
    }
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kStochGradAdam;
  HyperParams hyper;
  std::vector<Tensor> m;  // first moments, registry order
  std::vector<Tensor> v;  // second moments, registry order
  std::uint64_t t = 0;    // completed steps; the next update uses t + 1
  Rng rng;                // mask stream
  std::vector<std::string> names;  // optional, used in diagnostics

  OptimizerState() = default;
  OptimizerState(OptimizerKind k, const HyperParams& h,
                 std::span<const Shape> shapes, std::uint64_t mask_seed)
      : kind(k), hyper(h), rng(mask_seed) {
    hyper.validate();
    m.reserve(shapes.size());
    v.reserve(shapes.size());
    for (const auto& s : shapes) {
      m.emplace_back(s);
      v.emplace_back(s);
    }
  }
};

inline std::vector<Shape> parameter_shapes(const Model& model) {
  std::vector<Shape> out;
  for (const auto& p : model.parameters()) out.push_back(p.value->shape());
  return out;
}

inline OptimizerState make_optimizer_state(OptimizerKind kind,
                                           const HyperParams& hyper,
                                           const Model& model,
                                           std::uint64_t mask_seed) {
  const auto shapes = parameter_shapes(model);
  OptimizerState state(kind, hyper, shapes, mask_seed);
  for (const auto& p : model.parameters()) state.names.push_back(p.name);
  return state;
}

inline std::vector<Tensor*> parameter_tensors(Model& model) {
  std::vector<Tensor*> out;
  for (auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

struct StepStats {
  std::uint64_t kept = 0;   // mask entries equal to 1
  std::uint64_t total = 0;  // mask entries drawn
  double keep_fraction() const {
    return total ? static_cast<double>(kept) / static_cast<double>(total) : 1.0;
  }
};

// Bernoulli(s) mask: one uniform draw per element in row-major order,
// element is 1 iff u < s. u lies in [0, 1) so s = 1 always keeps and s = 0
// never does.
inline Tensor sample_mask(const Shape& shape, double s, Rng& rng) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ConfigError("sampling rate must lie in [0, 1]");
  }
  Tensor mask(shape);
  for (float& x : mask.data()) {
    x = static_cast<double>(rng.uniform()) < s ? 1.0f : 0.0f;
  }
  return mask;
}

inline Tensor sampled_gradient(const Tensor& mask, const Tensor& grad) {
  require_same_shape(mask, grad, "sampled_gradient");
  Tensor out(grad.shape());
  auto o = out.data();
  auto ms = mask.data();
  auto gs = grad.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ms[i] * gs[i];
  return out;
}

namespace detail {

// Per-step scalar coefficients shared by both optimizers.
struct StepCoefficients {
  float decay1, decay2;  // moment decay factors
  float keep1, keep2;    // 1 - decay
  float corr1, corr2;    // bias-correction denominators
};

inline StepCoefficients adam_coefficients(const HyperParams& h,
                                          std::uint64_t t) {
  const double td = static_cast<double>(t);
  const double c1 = 1.0 - std::pow(h.beta1, td);
  const double c2 = 1.0 - std::pow(h.beta2, td);
  return {static_cast<float>(h.beta1), static_cast<float>(h.beta2),
          static_cast<float>(1.0 - h.beta1), static_cast<float>(1.0 - h.beta2),
          static_cast<float>(c1), static_cast<float>(c2)};
}

inline StepCoefficients stochgradadam_coefficients(const HyperParams& h,
                                                   std::uint64_t t) {
  const double td = static_cast<double>(t);
  const double decay_t = std::pow(h.delta, td);
  const double b1 = h.beta1 * decay_t;
  const double b2 = h.beta2 * decay_t;
  double c1, c2;
  if (h.bias_correction == BiasCorrection::kLiteral) {
    c1 = 1.0 - b1;
    c2 = 1.0 - b2;
  } else {
    // prod_{k=1..t} beta * delta^k = beta^t * delta^(t(t+1)/2)
    const double cumulative_decay = std::pow(h.delta, td * (td + 1.0) / 2.0);
    c1 = 1.0 - std::pow(h.beta1, td) * cumulative_decay;
    c2 = 1.0 - std::pow(h.beta2, td) * cumulative_decay;
  }
  return {static_cast<float>(b1), static_cast<float>(b2),
          static_cast<float>(1.0 - b1), static_cast<float>(1.0 - b2),
          static_cast<float>(c1), static_cast<float>(c2)};
}

inline void check_step_inputs(const OptimizerState& state,
                              std::span<Tensor* const> params,
                              std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("optimizer step: " + std::to_string(params.size()) +
                     " params, " + std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.m.size()) + " state slots");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string what = "optimizer step, parameter #" + std::to_string(k);
    require_same_shape(*params[k], grads[k], what);
    require_same_shape(*params[k], state.m[k], what);
  }
}

// Runs the update into scratch buffers and commits only when every value is
// finite, so a failed step leaves params and moments untouched.
inline StepStats adaptive_step(OptimizerState& state,
                               std::span<Tensor* const> params,
                               std::span<const Tensor> grads, bool sample,
                               std::vector<Tensor>* sampled_out) {
  check_step_inputs(state, params, grads);
  const std::uint64_t t = state.t + 1;
  const auto c = sample ? stochgradadam_coefficients(state.hyper, t)
                        : adam_coefficients(state.hyper, t);
  const float mu = static_cast<float>(state.hyper.mu);
  const float eps = static_cast<float>(state.hyper.epsilon);

  StepStats stats;
  std::vector<Tensor> new_params, new_m, new_v;
  new_params.reserve(params.size());
  new_m.reserve(params.size());
  new_v.reserve(params.size());
  if (sampled_out) sampled_out->clear();

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor phi;
    if (sample) {
      const Tensor mask =
          sample_mask(grads[k].shape(), state.hyper.sampling_rate, state.rng);
      for (float x : mask.data()) stats.kept += x != 0.0f;
      stats.total += mask.size();
      phi = sampled_gradient(mask, grads[k]);
    } else {
      phi = grads[k];
      stats.kept += phi.size();
      stats.total += phi.size();
    }
    Tensor theta = *params[k];
    Tensor m = state.m[k];
    Tensor v = state.v[k];
    auto ps = phi.data();
    auto ts = theta.data();
    auto ms = m.data();
    auto vs = v.data();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const float g = ps[i];
      ms[i] = c.decay1 * ms[i] + c.keep1 * g;
      vs[i] = c.decay2 * vs[i] + c.keep2 * (g * g);
      const float m_hat = ms[i] / c.corr1;
      const float v_hat = vs[i] / c.corr2;
      ts[i] -= mu * m_hat / (std::sqrt(v_hat) + eps);
    }
    if (!theta.all_finite() || !m.all_finite() || !v.all_finite()) {
      const std::string name = k < state.names.size()
                                   ? state.names[k]
                                   : "#" + std::to_string(k);
      throw DivergenceError("optimizer step " + std::to_string(t) +
                            ": non-finite update for parameter " + name);
    }
    new_params.push_back(std::move(theta));
    new_m.push_back(std::move(m));
    new_v.push_back(std::move(v));
    if (sampled_out) sampled_out->push_back(std::move(phi));
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    *params[k] = std::move(new_params[k]);
  }
  state.m = std::move(new_m);
  state.v = std::move(new_v);
  state.t = t;
  return stats;
}

}  // namespace detail

// Adam with the standard exponentiated bias correction 1 - beta^t.
inline StepStats adam_step(OptimizerState& state,
                           std::span<Tensor* const> params,
                           std::span<const Tensor> grads,
                           std::vector<Tensor>* sampled_out = nullptr) {
  return detail::adaptive_step(state, params, grads, false, sampled_out);
}

// Adam over a freshly drawn Bernoulli(s) mask of every gradient tensor.
// Masks are drawn per tensor in registry order, elements in row-major order.
inline StepStats stochgradadam_step(OptimizerState& state,
                                    std::span<Tensor* const> params,
                                    std::span<const Tensor> grads,
                                    std::vector<Tensor>* sampled_out = nullptr) {
  return detail::adaptive_step(state, params, grads, true, sampled_out);
}

inline StepStats optimizer_step(OptimizerState& state,
                                std::span<Tensor* const> params,
                                std::span<const Tensor> grads,
                                std::vector<Tensor>* sampled_out = nullptr) {
  return state.kind == OptimizerKind::kAdam
             ? adam_step(state, params, grads, sampled_out)
             : stochgradadam_step(state, params, grads, sampled_out);
}

}  // namespace sgap
