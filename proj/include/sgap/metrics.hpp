#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgap/error.hpp"
#include "sgap/model.hpp"
#include "sgap/rng.hpp"
#include "sgap/tensor.hpp"

namespace sgap {

// Rows are the actual class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t k = 0) : classes(k), counts(k * k, 0) {}

  std::uint64_t& at(std::size_t actual, std::size_t predicted) {
    return counts[actual * classes + predicted];
  }
  std::uint64_t at(std::size_t actual, std::size_t predicted) const {
    return counts[actual * classes + predicted];
  }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }

  std::uint64_t trace() const {
    std::uint64_t n = 0;
    for (std::size_t k = 0; k < classes; ++k) n += at(k, k);
    return n;
  }

  double accuracy() const {
    const auto n = total();
    return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t r = 0; r < classes; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        if (c) os << ',';
        os << at(r, c);
      }
      os << '\n';
    }
  }
};

inline ConfusionMatrix confusion_matrix(const Model& model,
                                        const Tensor& features,
                                        std::span<const int> labels) {
  if (labels.empty()) throw DataError("confusion_matrix: empty dataset");
  const std::size_t k = model.num_classes();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw DataError("confusion_matrix: label " + std::to_string(labels[i]) +
                      " at row " + std::to_string(i) + " outside [0, " +
                      std::to_string(k) + ")");
    }
  }
  if (features.rank() != 2 || features.dim(0) != labels.size()) {
    throw ShapeError("confusion_matrix: features " +
                     shape_string(features.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const auto predicted = predict(model, features);
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++cm.at(static_cast<std::size_t>(labels[i]),
            static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

struct WeightHistogram {
  std::vector<double> bin_edges;  // bins + 1 ascending edges
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  std::uint64_t below_range = 0;  // clamped into the first bin
  std::uint64_t above_range = 0;  // clamped into the last bin
  double mean = 0.0;
  double stddev = 0.0;              // population standard deviation
  double fraction_unit_open = 0.0;  // share with 0 < |w| < 1
  double fraction_zero = 0.0;       // share exactly 0

  void write_csv(std::ostream& os) const {
    os << "edge,count\n";
    char buf[32];
    for (std::size_t b = 0; b < counts.size(); ++b) {
      std::snprintf(buf, sizeof buf, "%.9g", bin_edges[b]);
      os << buf << ',' << counts[b] << '\n';
    }
  }

  nlohmann::json summary_json() const {
    return {{"total", total},
            {"mean", mean},
            {"std", stddev},
            {"fraction_unit_open", fraction_unit_open},
            {"fraction_zero", fraction_zero},
            {"below_range", below_range},
            {"above_range", above_range},
            {"bins", counts.size()},
            {"lo", bin_edges.front()},
            {"hi", bin_edges.back()}};
  }
};

// Equal-width bins over [lo, hi]. Bin b is [edge_b, edge_b+1) except the last,
// which is closed; values outside the range land in the edge bins.
inline WeightHistogram weight_histogram(std::span<const float> weights,
                                        std::size_t bins = 101,
                                        double lo = -1.5, double hi = 1.5) {
  if (bins < 1) throw ConfigError("weight_histogram: bins must be >= 1");
  if (!(lo < hi)) throw ConfigError("weight_histogram: need lo < hi");
  WeightHistogram h;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  h.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.bin_edges[b] = lo + width * static_cast<double>(b);
  }
  h.bin_edges.back() = hi;

  double sum = 0.0;
  std::uint64_t unit = 0, zero = 0;
  for (float wf : weights) {
    const double w = wf;
    sum += w;
    if (w < lo) ++h.below_range;
    if (w > hi) ++h.above_range;
    const double pos = std::floor((w - lo) / width);
    const auto idx = static_cast<std::size_t>(
        std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
    const double a = std::fabs(w);
    if (a == 0.0) ++zero;
    if (a > 0.0 && a < 1.0) ++unit;
  }
  h.total = weights.size();
  if (h.total) {
    const double n = static_cast<double>(h.total);
    h.mean = sum / n;
    double sq = 0.0;
    for (float wf : weights) {
      const double d = static_cast<double>(wf) - h.mean;
      sq += d * d;
    }
    h.stddev = std::sqrt(sq / n);
    h.fraction_unit_open = static_cast<double>(unit) / n;
    h.fraction_zero = static_cast<double>(zero) / n;
  }
  return h;
}

inline WeightHistogram weight_histogram(const Model& model,
                                        std::size_t bins = 101,
                                        double lo = -1.5, double hi = 1.5) {
  std::vector<float> pool;
  for (const auto& p : model.parameters()) {
    if (!p.prunable) continue;
    pool.insert(pool.end(), p.value->data().begin(), p.value->data().end());
  }
  return weight_histogram(pool, bins, lo, hi);
}

// ---------------------------------------------------------------------------
// Per-component accumulators for the chain
//   sum_t |phi_t,i| / sqrt(t) <= sum_t |g_t,i| / sqrt(t) <= 2 Ginf ||g_1:T,i||_2

struct TrackedComponent {
  std::size_t param = 0;    // registry index
  std::size_t element = 0;  // flat index inside the tensor
};

struct BoundComponent {
  double sampled_sum = 0.0;   // sum_t sqrt(phi^2 / t)
  double gradient_sum = 0.0;  // sum_t sqrt(g^2 / t)
  double squared_norm = 0.0;  // ||g_1:t||_2^2
  double g_inf = 0.0;         // max_tau |g_tau|

  double bound() const { return 2.0 * g_inf * std::sqrt(squared_norm); }
};

struct BoundCheck {
  std::size_t components = 0;
  std::size_t left_violations = 0;   // sampled_sum > gradient_sum
  std::size_t right_violations = 0;  // gradient_sum > bound
  double worst_left_ratio = 0.0;     // max sampled_sum / gradient_sum
  double worst_right_ratio = 0.0;    // max gradient_sum / bound

  bool left_ok() const { return left_violations == 0; }
  bool right_ok() const { return right_violations == 0; }
  bool ok() const { return left_ok() && right_ok(); }
};

// Seeded choice of up to `per_tensor` components from every tensor.
inline std::vector<TrackedComponent> select_components(
    std::span<const Shape> shapes, std::size_t per_tensor, Rng& rng) {
  std::vector<TrackedComponent> out;
  for (std::size_t p = 0; p < shapes.size(); ++p) {
    const std::size_t n = shape_size(shapes[p]);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const std::size_t take = std::min(per_tensor, n);
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + rng.below(n - i);
      std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) out.push_back({p, idx[i]});
  }
  return out;
}

class BoundTracker {
 public:
  static constexpr double kSlack = 1e-4;

  BoundTracker() = default;
  explicit BoundTracker(std::vector<TrackedComponent> tracked)
      : tracked_(std::move(tracked)), acc_(tracked_.size()) {}

  const std::vector<TrackedComponent>& tracked() const { return tracked_; }
  const std::vector<BoundComponent>& components() const { return acc_; }
  std::uint64_t steps() const { return t_; }

  // Adds step t (1-based, consecutive) for every tracked component.
  void update(std::span<const Tensor> grads, std::span<const Tensor> sampled,
              std::uint64_t t) {
    if (t != t_ + 1) {
      throw Error("bound_update: expected step " + std::to_string(t_ + 1) +
                  ", got " + std::to_string(t));
    }
    if (grads.size() != sampled.size()) {
      throw ShapeError("bound_update: gradient and sampled lists differ");
    }
    const double inv_sqrt_t = 1.0 / std::sqrt(static_cast<double>(t));
    for (std::size_t c = 0; c < tracked_.size(); ++c) {
      const auto& tc = tracked_[c];
      if (tc.param >= grads.size() || tc.element >= grads[tc.param].size() ||
          sampled[tc.param].shape() != grads[tc.param].shape()) {
        throw ShapeError("bound_update: tracked component out of range");
      }
      const double g = grads[tc.param][tc.element];
      const double phi = sampled[tc.param][tc.element];
      auto& a = acc_[c];
      a.sampled_sum += std::fabs(phi) * inv_sqrt_t;
      a.gradient_sum += std::fabs(g) * inv_sqrt_t;
      a.squared_norm += g * g;
      a.g_inf = std::max(a.g_inf, std::fabs(g));
    }
    t_ = t;
  }

  BoundCheck check() const {
    BoundCheck out;
    out.components = acc_.size();
    for (const auto& a : acc_) {
      if (a.sampled_sum > a.gradient_sum * (1.0 + kSlack)) ++out.left_violations;
      if (a.gradient_sum > a.bound() * (1.0 + kSlack)) ++out.right_violations;
      if (a.gradient_sum > 0.0) {
        out.worst_left_ratio =
            std::max(out.worst_left_ratio, a.sampled_sum / a.gradient_sum);
      }
      const double b = a.bound();
      if (b > 0.0) {
        out.worst_right_ratio = std::max(out.worst_right_ratio, a.gradient_sum / b);
      } else if (a.gradient_sum > 0.0) {
        out.worst_right_ratio = std::numeric_limits<double>::infinity();
      }
    }
    return out;
  }

 private:
  std::vector<TrackedComponent> tracked_;
  std::vector<BoundComponent> acc_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------

// (acc0 - accP) / acc0 * 100. Positive is a loss, negative a gain.
inline double relative_accuracy_loss(double acc0, double acc_p) {
  if (!(acc0 > 0.0)) {
    throw ConfigError("relative_accuracy_loss: baseline accuracy must be > 0");
  }
  return (acc0 - acc_p) / acc0 * 100.0;
}

// Two decimals with a percent sign; gains carry a "+" prefix ("+0.04%").
inline std::string format_relative_loss(double percent) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", std::fabs(percent));
  const std::string digits = buf;
  if (digits == "0.00") return "0.00%";
  return (percent < 0.0 ? "+" : "") + digits + "%";
}

}  // namespace sgap
