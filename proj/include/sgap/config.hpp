#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sgap/error.hpp"
#include "sgap/model.hpp"
#include "sgap/optim.hpp"
#include "sgap/prune.hpp"

namespace sgap {

struct DatasetSpec {
  std::string kind = "spirals";  // spirals | blobs | cifar10
  std::string cifar_dir;
  std::size_t classes = 10;
  std::size_t train_samples = 5000;
  std::size_t test_samples = 1000;
  std::size_t dims = 16;
  double separation = 10.0;
  bool standardize = false;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ExperimentConfig {
  std::size_t width = 64;
  std::size_t blocks = 3;
  OptimizerKind optimizer = OptimizerKind::kStochGradAdam;
  HyperParams hyper;
  DatasetSpec dataset;
  std::size_t epochs = 60;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  std::vector<double> grid = default_grid();
  PruneMode prune_mode = PruneMode::kGlobal;
  std::size_t seeds = 1;  // repeats for compare
  bool track_bounds = false;
  std::size_t bound_components = 64;
  bool histograms = true;
  bool confusion = false;
  std::size_t histogram_bins = 101;
  double histogram_lo = -1.5;
  double histogram_hi = 1.5;

  static std::vector<double> default_grid() {
    std::vector<double> g;
    for (int p = 0; p <= 70; p += 5) g.push_back(p);
    return g;
  }

  void validate() const {
    hyper.validate();
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (width < 1) throw ConfigError("width must be >= 1");
    if (seeds < 1) throw ConfigError("seeds must be >= 1");
    if (grid.empty()) throw ConfigError("grid must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] >= 0.0 && grid[i] <= 100.0)) {
        throw ConfigError("grid values must lie in [0, 100]");
      }
      if (i > 0 && !(grid[i] > grid[i - 1])) {
        throw ConfigError("grid values must be strictly increasing");
      }
    }
    if (dataset.kind != "spirals" && dataset.kind != "blobs" &&
        dataset.kind != "cifar10") {
      throw ConfigError("unknown dataset '" + dataset.kind + "'");
    }
    if (dataset.kind == "cifar10" && dataset.cifar_dir.empty()) {
      throw ConfigError("cifar10 dataset needs a directory (cifar10:<dir>)");
    }
    if (!(histogram_lo < histogram_hi) || histogram_bins < 1) {
      throw ConfigError("invalid histogram range");
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" +
                      text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + text + "'");
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

// "lo:hi:step" (inclusive) or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == ':') {
        parts.push_back(text.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 3) {
      throw ConfigError("'grid': expected lo:hi:step, got '" + text + "'");
    }
    const double lo = detail::parse_double("grid", parts[0]);
    const double hi = detail::parse_double("grid", parts[1]);
    const double step = detail::parse_double("grid", parts[2]);
    if (!(step > 0.0)) throw ConfigError("'grid': step must be > 0");
    for (std::size_t k = 0;; ++k) {
      const double p = lo + step * static_cast<double>(k);
      if (p > hi + 1e-9) break;
      out.push_back(p);
    }
  } else {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == ',') {
        out.push_back(
            detail::parse_double("grid", detail::trim(text.substr(start, i - start))));
        start = i + 1;
      }
    }
  }
  return out;
}

inline std::string format_grid(const std::vector<double>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) out += ',';
    out += detail::format_double(grid[i]);
  }
  return out;
}

// Applies one key = value setting. Unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key,
                          const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_uint;
  if (key == "seed") c.seed = parse_uint(key, value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "optimizer") c.optimizer = parse_optimizer_kind(value);
  else if (key == "lr" || key == "mu") c.hyper.mu = parse_double(key, value);
  else if (key == "beta1") c.hyper.beta1 = parse_double(key, value);
  else if (key == "beta2") c.hyper.beta2 = parse_double(key, value);
  else if (key == "epsilon") c.hyper.epsilon = parse_double(key, value);
  else if (key == "delta") c.hyper.delta = parse_double(key, value);
  else if (key == "sampling_rate") c.hyper.sampling_rate = parse_double(key, value);
  else if (key == "bias_correction") c.hyper.bias_correction = parse_bias_correction(value);
  else if (key == "epochs") c.epochs = parse_uint(key, value);
  else if (key == "batch_size") c.batch_size = parse_uint(key, value);
  else if (key == "grid") c.grid = parse_grid(value);
  else if (key == "prune_mode") c.prune_mode = parse_prune_mode(value);
  else if (key == "seeds") c.seeds = parse_uint(key, value);
  else if (key == "width") c.width = parse_uint(key, value);
  else if (key == "blocks") c.blocks = parse_uint(key, value);
  else if (key == "track_bounds") c.track_bounds = parse_bool(key, value);
  else if (key == "bound_components") c.bound_components = parse_uint(key, value);
  else if (key == "histograms") c.histograms = parse_bool(key, value);
  else if (key == "confusion") c.confusion = parse_bool(key, value);
  else if (key == "histogram_bins") c.histogram_bins = parse_uint(key, value);
  else if (key == "histogram_lo") c.histogram_lo = parse_double(key, value);
  else if (key == "histogram_hi") c.histogram_hi = parse_double(key, value);
  else if (key == "dataset") {
    if (value.rfind("cifar10:", 0) == 0) {
      c.dataset.kind = "cifar10";
      c.dataset.cifar_dir = value.substr(8);
      c.dataset.classes = 10;
    } else {
      c.dataset.kind = value;
    }
  }
  else if (key == "classes") c.dataset.classes = parse_uint(key, value);
  else if (key == "train_samples") c.dataset.train_samples = parse_uint(key, value);
  else if (key == "test_samples") c.dataset.test_samples = parse_uint(key, value);
  else if (key == "dims") c.dataset.dims = parse_uint(key, value);
  else if (key == "separation") c.dataset.separation = parse_double(key, value);
  else if (key == "standardize") c.dataset.standardize = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

// Every setting as key -> text; apply_setting over this map reproduces c.
inline std::map<std::string, std::string> to_settings(const ExperimentConfig& c) {
  using detail::format_double;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"seed", std::to_string(c.seed)},
      {"out_dir", c.out_dir},
      {"optimizer", to_string(c.optimizer)},
      {"lr", format_double(c.hyper.mu)},
      {"beta1", format_double(c.hyper.beta1)},
      {"beta2", format_double(c.hyper.beta2)},
      {"epsilon", format_double(c.hyper.epsilon)},
      {"delta", format_double(c.hyper.delta)},
      {"sampling_rate", format_double(c.hyper.sampling_rate)},
      {"bias_correction", to_string(c.hyper.bias_correction)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"grid", format_grid(c.grid)},
      {"prune_mode", to_string(c.prune_mode)},
      {"seeds", std::to_string(c.seeds)},
      {"width", std::to_string(c.width)},
      {"blocks", std::to_string(c.blocks)},
      {"track_bounds", b(c.track_bounds)},
      {"bound_components", std::to_string(c.bound_components)},
      {"histograms", b(c.histograms)},
      {"confusion", b(c.confusion)},
      {"histogram_bins", std::to_string(c.histogram_bins)},
      {"histogram_lo", format_double(c.histogram_lo)},
      {"histogram_hi", format_double(c.histogram_hi)},
      {"dataset", c.dataset.kind == "cifar10" ? "cifar10:" + c.dataset.cifar_dir
                                              : c.dataset.kind},
      {"classes", std::to_string(c.dataset.classes)},
      {"train_samples", std::to_string(c.dataset.train_samples)},
      {"test_samples", std::to_string(c.dataset.test_samples)},
      {"dims", std::to_string(c.dataset.dims)},
      {"separation", format_double(c.dataset.separation)},
      {"standardize", b(c.dataset.standardize)},
  };
}

// Flat "key = value" document; '#' starts a comment.
inline std::map<std::string, std::string> parse_settings(const std::string& text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    out[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_settings_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_settings(text);
}

inline ExperimentConfig config_from_settings(
    const std::map<std::string, std::string>& settings,
    ExperimentConfig base = {}) {
  for (const auto& [k, v] : settings) apply_setting(base, k, v);
  return base;
}

}  // namespace sgap
