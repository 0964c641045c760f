#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgap/error.hpp"
#include "sgap/model.hpp"

namespace sgap {

// Global: one threshold over the pooled magnitudes of every weight matrix.
// PerLayer: each weight matrix gets its own threshold at the same percentile.
enum class PruneMode { kGlobal, kPerLayer };

inline std::string to_string(PruneMode mode) {
  return mode == PruneMode::kGlobal ? "global" : "per_layer";
}

inline PruneMode parse_prune_mode(const std::string& name) {
  if (name == "global") return PruneMode::kGlobal;
  if (name == "per_layer") return PruneMode::kPerLayer;
  throw ConfigError("unknown prune mode '" + name +
                    "' (expected global or per_layer)");
}

struct PruneReport {
  double percentile = 0.0;
  double threshold = 0.0;  // global psi; in per-layer mode the largest one
  std::size_t total_weights = 0;
  std::size_t pruned_count = 0;  // weights with |w| < psi, set to zero
  std::map<std::string, double> per_layer_zero_fraction;
  std::optional<double> post_accuracy;

  double pruned_fraction() const {
    return total_weights ? static_cast<double>(pruned_count) /
                               static_cast<double>(total_weights)
                         : 0.0;
  }
};

// 1-based rank ceil(P/100 * n) of the percentile threshold; 0 when P = 0.
inline std::size_t percentile_index(double percentile, std::size_t n) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw ConfigError("percentile must lie in [0, 100]");
  }
  // P * n is exact for integral percentiles, so the quotient is exact too.
  const double idx = std::ceil(percentile * static_cast<double>(n) / 100.0);
  return std::min(n, static_cast<std::size_t>(idx));
}

// psi = sorted(|W|)[ceil(P/100 * |W|)] with 1-based indexing, psi = 0 at P = 0.
inline double compute_threshold(std::span<const float> weights,
                                double percentile) {
  if (weights.empty()) {
    throw ConfigError("compute_threshold: empty weight set");
  }
  const std::size_t idx = percentile_index(percentile, weights.size());
  if (idx == 0) return 0.0;
  std::vector<float> magnitudes(weights.size());
  std::transform(weights.begin(), weights.end(), magnitudes.begin(),
                 [](float w) { return std::fabs(w); });
  auto nth = magnitudes.begin() + static_cast<std::ptrdiff_t>(idx - 1);
  std::nth_element(magnitudes.begin(), nth, magnitudes.end());
  return static_cast<double>(*nth);
}

// Every weight value that takes part in pruning, in registry order.
inline std::vector<float> prunable_weights(const Model& model) {
  std::vector<float> out;
  for (const auto& p : model.parameters()) {
    if (!p.prunable) continue;
    out.insert(out.end(), p.value->data().begin(), p.value->data().end());
  }
  return out;
}

namespace detail {

inline std::size_t prune_tensor(Tensor& weights, double threshold) {
  std::size_t pruned = 0;
  for (float& w : weights.data()) {
    if (static_cast<double>(std::fabs(w)) < threshold) {
      w = 0.0f;
      ++pruned;
    }
  }
  return pruned;
}

inline double zero_fraction(const Tensor& t) {
  const auto zeros = std::count(t.data().begin(), t.data().end(), 0.0f);
  return static_cast<double>(zeros) / static_cast<double>(t.size());
}

}  // namespace detail

// Zeroes every weight with |w| < threshold; ties at the threshold survive and
// biases are never touched.
inline PruneReport apply_pruning(Model& model, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ConfigError("apply_pruning: threshold must be >= 0");
  }
  PruneReport report;
  report.threshold = threshold;
  for (auto& p : model.parameters()) {
    if (!p.prunable) continue;
    report.total_weights += p.value->size();
    report.pruned_count += detail::prune_tensor(*p.value, threshold);
    report.per_layer_zero_fraction[p.name] = detail::zero_fraction(*p.value);
  }
  return report;
}

inline PruneReport prune_in_place(Model& model, double percentile,
                                  PruneMode mode = PruneMode::kGlobal) {
  PruneReport report;
  if (mode == PruneMode::kGlobal) {
    const auto pool = prunable_weights(model);
    report = apply_pruning(model, compute_threshold(pool, percentile));
  } else {
    for (auto& p : model.parameters()) {
      if (!p.prunable) continue;
      const double psi = compute_threshold(p.value->data(), percentile);
      report.threshold = std::max(report.threshold, psi);
      report.total_weights += p.value->size();
      report.pruned_count += detail::prune_tensor(*p.value, psi);
      report.per_layer_zero_fraction[p.name] = detail::zero_fraction(*p.value);
    }
  }
  report.percentile = percentile;
  return report;
}

struct PruneResult {
  Model model;
  PruneReport report;
};

// Copy-and-prune; the input model is left untouched.
inline PruneResult prune_at_rate(const Model& model, double percentile,
                                 PruneMode mode = PruneMode::kGlobal) {
  PruneResult result{model, {}};
  result.report = prune_in_place(result.model, percentile, mode);
  return result;
}

}  // namespace sgap
