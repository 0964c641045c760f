#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgap/checkpoint.hpp"
#include "sgap/config.hpp"
#include "sgap/data.hpp"
#include "sgap/error.hpp"
#include "sgap/metrics.hpp"
#include "sgap/model.hpp"
#include "sgap/optim.hpp"
#include "sgap/prune.hpp"
#include "sgap/rng.hpp"

namespace sgap {

namespace fs = std::filesystem;

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation; 0 for fewer than two values.
inline double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double sq = 0.0;
  for (double x : xs) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Data

struct DataSplits {
  Dataset train;
  Dataset test;
};

inline DataSplits load_data(const ExperimentConfig& c) {
  DataSplits out;
  if (c.dataset.kind == "cifar10") {
    auto splits = load_cifar10(c.dataset.cifar_dir, c.dataset.standardize);
    out.train = std::move(splits.train);
    out.test = std::move(splits.test);
  } else {
    SyntheticSpec spec;
    spec.kind = c.dataset.kind == "blobs" ? SyntheticKind::kGaussianBlobs
                                          : SyntheticKind::kSpirals;
    spec.classes = c.dataset.classes;
    spec.dims = c.dataset.dims;
    spec.separation = c.dataset.separation;
    spec.samples = c.dataset.train_samples;
    out.train = generate_synthetic(spec, derive_seed(c.seed, streams::kDataTrain));
    spec.samples = c.dataset.test_samples;
    out.test = generate_synthetic(spec, derive_seed(c.seed, streams::kDataTest));
    out.train.split = "train";
    out.test.split = "test";
  }
  out.train.validate();
  out.test.validate();
  if (out.train.dims() != out.test.dims() ||
      out.train.num_classes != out.test.num_classes) {
    throw DataError("train and test splits disagree on shape");
  }
  return out;
}

inline ModelSpec model_spec_for(const ExperimentConfig& c, const Dataset& train) {
  return {train.dims(), c.width, c.blocks, train.num_classes};
}

// ---------------------------------------------------------------------------
// Training

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double batch_accuracy = 0.0;
  double keep_fraction = 1.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t steps = 0;  // cumulative
  double loss = 0.0;        // mean over the epoch's batches
  double train_accuracy = 0.0;  // running, over the epoch's batches
  double test_accuracy = 0.0;
  double keep_fraction = 1.0;
  std::optional<BoundCheck> bounds;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  void write_epochs_csv(std::ostream& os) const {
    os << "epoch,steps,loss,train_accuracy,test_accuracy,keep_fraction,"
          "bound_left_violations,bound_right_violations\n";
    for (const auto& e : epochs) {
      os << e.epoch << ',' << e.steps << ',' << detail::num(e.loss) << ','
         << detail::num(e.train_accuracy) << ',' << detail::num(e.test_accuracy)
         << ',' << detail::num(e.keep_fraction) << ',';
      if (e.bounds) {
        os << e.bounds->left_violations << ',' << e.bounds->right_violations;
      } else {
        os << ',';
      }
      os << '\n';
    }
  }

  void write_steps_csv(std::ostream& os) const {
    os << "step,epoch,loss,batch_accuracy,keep_fraction\n";
    for (const auto& s : steps) {
      os << s.step << ',' << s.epoch << ',' << detail::num(s.loss) << ','
         << detail::num(s.batch_accuracy) << ',' << detail::num(s.keep_fraction)
         << '\n';
    }
  }
};

struct TrainResult {
  Model model;
  ModelSpec spec;
  OptimizerState optimizer;
  RunLog log;
  std::optional<BoundTracker> bounds;
  double test_accuracy = 0.0;
  std::string dataset_provenance;
};

inline CheckpointMeta checkpoint_meta(const ExperimentConfig& c,
                                      const TrainResult& r) {
  CheckpointMeta meta;
  meta.model_spec = r.spec;
  meta.optimizer = to_string(c.optimizer);
  meta.hyper = c.hyper;
  meta.step = r.optimizer.t;
  meta.rng_state = r.optimizer.rng.state();
  meta.dataset = r.dataset_provenance;
  nlohmann::json settings = nlohmann::json::object();
  for (const auto& [k, v] : to_settings(c)) settings[k] = v;
  meta.extra["config"] = settings;
  meta.extra["epochs_completed"] = r.log.epochs.size();
  return meta;
}

// Configuration recorded in a checkpoint, or defaults if there is none.
inline ExperimentConfig config_from_checkpoint(const CheckpointMeta& meta) {
  ExperimentConfig c;
  if (meta.extra.contains("config")) {
    std::map<std::string, std::string> settings;
    for (const auto& [k, v] : meta.extra.at("config").items()) {
      settings[k] = v.get<std::string>();
    }
    c = config_from_settings(settings);
  }
  if (meta.model_spec) {
    c.width = meta.model_spec->width;
    c.blocks = meta.model_spec->blocks;
  }
  return c;
}

inline nlohmann::json bound_json(const BoundCheck& check) {
  return {{"components", check.components},
          {"left_violations", check.left_violations},
          {"right_violations", check.right_violations},
          {"worst_left_ratio", check.worst_left_ratio},
          {"worst_right_ratio", check.worst_right_ratio},
          {"left_ok", check.left_ok()},
          {"right_ok", check.right_ok()}};
}

namespace detail {

inline void write_train_outputs(const ExperimentConfig& c, const TrainResult& r,
                                const std::string& checkpoint_name) {
  const fs::path dir = c.out_dir;
  save_checkpoint(dir / checkpoint_name, r.model, checkpoint_meta(c, r));
  std::ostringstream epochs, steps;
  r.log.write_epochs_csv(epochs);
  r.log.write_steps_csv(steps);
  write_text(dir / "runlog.csv", epochs.str());
  write_text(dir / "steps.csv", steps.str());

  nlohmann::json summary;
  summary["optimizer"] = to_string(c.optimizer);
  summary["hyper"] = to_json(c.hyper);
  summary["seed"] = c.seed;
  summary["dataset"] = r.dataset_provenance;
  summary["epochs_completed"] = r.log.epochs.size();
  summary["steps"] = r.optimizer.t;
  summary["test_accuracy"] = r.test_accuracy;
  if (!r.log.epochs.empty()) {
    summary["final_loss"] = r.log.epochs.back().loss;
    summary["train_accuracy"] = r.log.epochs.back().train_accuracy;
  }
  if (r.bounds) summary["track_bounds"] = bound_json(r.bounds->check());
  if (c.histograms) {
    const auto h =
        weight_histogram(r.model, c.histogram_bins, c.histogram_lo, c.histogram_hi);
    std::ostringstream hist;
    h.write_csv(hist);
    write_text(dir / "histogram.csv", hist.str());
    summary["weights"] = h.summary_json();
  }
  write_json(dir / "train_summary.json", summary);

  if (r.bounds) {
    std::ostringstream os;
    os << "param,element,sampled_sum,gradient_sum,bound,left_ok,right_ok\n";
    const auto& tracked = r.bounds->tracked();
    const auto& acc = r.bounds->components();
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      const auto& a = acc[i];
      const bool left = !(a.sampled_sum > a.gradient_sum * (1.0 + BoundTracker::kSlack));
      const bool right = !(a.gradient_sum > a.bound() * (1.0 + BoundTracker::kSlack));
      os << r.optimizer.names[tracked[i].param] << ',' << tracked[i].element << ','
         << num(a.sampled_sum) << ',' << num(a.gradient_sum) << ','
         << num(a.bound()) << ',' << left << ',' << right << '\n';
    }
    write_text(dir / "bounds.csv", os.str());
  }
}

}  // namespace detail

// Trains a fresh residual MLP. With write_outputs the run directory receives
// checkpoint.sgap, runlog.csv, steps.csv, train_summary.json and, when
// enabled, histogram.csv and bounds.csv. A divergent step stops training:
// the last finite parameters go to last_good.sgap and DivergenceError
// propagates.
inline TrainResult train(const ExperimentConfig& c, const DataSplits& data,
                         bool write_outputs = true) {
  c.validate();
  const Dataset& train_set = data.train;
  TrainResult r;
  r.spec = model_spec_for(c, train_set);
  r.model = build_residual_mlp(r.spec);
  r.dataset_provenance = train_set.provenance;
  Rng init_rng(c.seed, streams::kInit);
  init_he_uniform(r.model, init_rng);
  r.optimizer = make_optimizer_state(c.optimizer, c.hyper, r.model,
                                     derive_seed(c.seed, streams::kMask));
  if (c.track_bounds) {
    Rng pick(c.seed, streams::kTracking);
    const auto shapes = parameter_shapes(r.model);
    r.bounds.emplace(select_components(shapes, c.bound_components, pick));
  }

  Rng shuffle_rng(c.seed, streams::kShuffle);
  const std::size_t n = train_set.size();
  const std::size_t d = train_set.dims();
  std::vector<std::size_t> order(n);
  std::vector<Tensor> sampled;
  auto params = parameter_tensors(r.model);

  try {
    for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle_rng.shuffle(order.begin(), order.end());
      double loss_sum = 0.0, kept = 0.0, total = 0.0;
      std::size_t correct = 0, batches = 0;
      for (std::size_t start = 0; start < n; start += c.batch_size) {
        const std::size_t bs = std::min(c.batch_size, n - start);
        Tensor x({bs, d});
        std::vector<int> y(bs);
        for (std::size_t b = 0; b < bs; ++b) {
          const std::size_t src = order[start + b];
          auto row = train_set.features.row(src);
          std::copy(row.begin(), row.end(), x.row(b).begin());
          y[b] = train_set.labels[src];
        }
        const Tensor logits = r.model.forward(x);
        std::size_t batch_correct = 0;
        for (std::size_t b = 0; b < bs; ++b) {
          batch_correct += static_cast<int>(argmax(logits.row(b))) == y[b];
        }
        const Gradients g = r.model.backward(y);
        if (!std::isfinite(g.loss)) {
          throw DivergenceError("non-finite loss at step " +
                                std::to_string(r.optimizer.t + 1));
        }
        const StepStats stats = optimizer_step(r.optimizer, params, g.grads,
                                               r.bounds ? &sampled : nullptr);
        if (r.bounds) r.bounds->update(g.grads, sampled, r.optimizer.t);

        r.log.steps.push_back({r.optimizer.t, epoch, g.loss,
                               static_cast<double>(batch_correct) /
                                   static_cast<double>(bs),
                               stats.keep_fraction()});
        loss_sum += g.loss;
        correct += batch_correct;
        kept += static_cast<double>(stats.kept);
        total += static_cast<double>(stats.total);
        ++batches;
      }
      EpochRecord e;
      e.epoch = epoch;
      e.steps = r.optimizer.t;
      e.loss = loss_sum / static_cast<double>(batches);
      e.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
      e.test_accuracy = eval_accuracy(r.model, data.test);
      e.keep_fraction = total > 0.0 ? kept / total : 1.0;
      if (r.bounds) e.bounds = r.bounds->check();
      r.log.epochs.push_back(e);
    }
  } catch (const DivergenceError& err) {
    std::string where;
    if (write_outputs) {
      detail::write_train_outputs(c, r, "last_good.sgap");
      where = "; last good parameters saved to " +
              (fs::path(c.out_dir) / "last_good.sgap").string();
    }
    throw DivergenceError(std::string(err.what()) + where);
  }

  r.test_accuracy = eval_accuracy(r.model, data.test);
  if (write_outputs) detail::write_train_outputs(c, r, "checkpoint.sgap");
  return r;
}

inline TrainResult train(const ExperimentConfig& c, bool write_outputs = true) {
  c.validate();
  return train(c, load_data(c), write_outputs);
}

// ---------------------------------------------------------------------------
// Pruning sweep

struct SweepRow {
  double percentile = 0.0;
  double threshold = 0.0;
  double pruned_fraction = 0.0;
  double accuracy = 0.0;
  double relative_loss = 0.0;  // percent of the unpruned accuracy
  std::optional<ConfusionMatrix> confusion;
};

struct SweepReport {
  double baseline_accuracy = 0.0;
  PruneMode mode = PruneMode::kGlobal;
  std::vector<SweepRow> rows;

  const SweepRow* at(double percentile) const {
    for (const auto& row : rows) {
      if (row.percentile == percentile) return &row;
    }
    return nullptr;
  }

  void write_csv(std::ostream& os) const {
    os << "P,psi,pruned_fraction,accuracy,relative_loss\n";
    for (const auto& row : rows) {
      os << detail::num(row.percentile) << ',' << detail::num(row.threshold)
         << ',' << detail::num(row.pruned_fraction) << ','
         << detail::num(row.accuracy) << ','
         << format_relative_loss(row.relative_loss) << '\n';
    }
  }
};

// Each grid entry prunes a fresh copy of `model`; the input is never
// modified. Relative loss is measured against the unpruned accuracy, which is
// what the P = 0 row reproduces.
inline SweepReport sweep(const Model& model, const Dataset& test,
                         const std::vector<double>& grid,
                         PruneMode mode = PruneMode::kGlobal,
                         bool with_confusion = false) {
  SweepReport report;
  report.mode = mode;
  report.baseline_accuracy = eval_accuracy(model, test);
  for (double p : grid) {
    auto pruned = prune_at_rate(model, p, mode);
    SweepRow row;
    row.percentile = p;
    row.threshold = pruned.report.threshold;
    row.pruned_fraction = pruned.report.pruned_fraction();
    row.accuracy = eval_accuracy(pruned.model, test);
    row.relative_loss = report.baseline_accuracy > 0.0
                            ? relative_accuracy_loss(report.baseline_accuracy,
                                                     row.accuracy)
                            : std::nan("");
    if (with_confusion) {
      row.confusion = confusion_matrix(pruned.model, test.features, test.labels);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline void write_sweep_outputs(const SweepReport& report, const fs::path& dir) {
  std::ostringstream os;
  report.write_csv(os);
  detail::write_text(dir / "sweep.csv", os.str());
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"P", row.percentile},
                    {"psi", row.threshold},
                    {"pruned_fraction", row.pruned_fraction},
                    {"accuracy", row.accuracy},
                    {"relative_loss", std::isfinite(row.relative_loss)
                                          ? nlohmann::json(row.relative_loss)
                                          : nlohmann::json(nullptr)}});
    if (row.confusion) {
      std::ostringstream cm;
      row.confusion->write_csv(cm);
      detail::write_text(dir / ("confusion_P" + detail::num(row.percentile) + ".csv"),
                         cm.str());
    }
  }
  detail::write_json(dir / "sweep.json",
                     {{"baseline_accuracy", report.baseline_accuracy},
                      {"mode", to_string(report.mode)},
                      {"rows", rows}});
}

// ---------------------------------------------------------------------------
// Optimizer comparison

struct ArmResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;    // unpruned test accuracy
  double weight_std = 0.0;  // population std of the prunable weights
  double fraction_unit_open = 0.0;
  SweepReport sweep;
};

struct CompareReport {
  ExperimentConfig a;
  ExperimentConfig b;
  std::vector<ArmResult> arm_a;
  std::vector<ArmResult> arm_b;

  // Per-seed relative loss at P for both arms; nullopt if P is not swept.
  std::optional<std::pair<std::vector<double>, std::vector<double>>>
  relative_losses(double percentile) const {
    std::vector<double> la, lb;
    for (std::size_t r = 0; r < arm_a.size(); ++r) {
      const auto* ra = arm_a[r].sweep.at(percentile);
      const auto* rb = arm_b[r].sweep.at(percentile);
      if (!ra || !rb) return std::nullopt;
      la.push_back(ra->relative_loss);
      lb.push_back(rb->relative_loss);
    }
    return std::make_pair(la, lb);
  }

  std::vector<double> accuracies(bool arm_b_side) const {
    std::vector<double> out;
    for (const auto& r : arm_b_side ? arm_b : arm_a) out.push_back(r.accuracy);
    return out;
  }

  std::vector<double> weight_stds(bool arm_b_side) const {
    std::vector<double> out;
    for (const auto& r : arm_b_side ? arm_b : arm_a) out.push_back(r.weight_std);
    return out;
  }

  void write_csv(std::ostream& os) const {
    os << "seed,P,psi_a,psi_b,pruned_fraction_a,pruned_fraction_b,accuracy_a,"
          "accuracy_b,relative_loss_a,relative_loss_b,accuracy_delta\n";
    for (std::size_t r = 0; r < arm_a.size(); ++r) {
      const auto& sa = arm_a[r].sweep.rows;
      const auto& sb = arm_b[r].sweep.rows;
      for (std::size_t i = 0; i < sa.size(); ++i) {
        os << arm_a[r].seed << ',' << detail::num(sa[i].percentile) << ','
           << detail::num(sa[i].threshold) << ',' << detail::num(sb[i].threshold)
           << ',' << detail::num(sa[i].pruned_fraction) << ','
           << detail::num(sb[i].pruned_fraction) << ','
           << detail::num(sa[i].accuracy) << ',' << detail::num(sb[i].accuracy)
           << ',' << detail::num(sa[i].relative_loss) << ','
           << detail::num(sb[i].relative_loss) << ','
           << detail::num(sb[i].accuracy - sa[i].accuracy) << '\n';
      }
    }
  }

  void write_summary_csv(std::ostream& os) const {
    os << "P,accuracy_a_mean,accuracy_a_std,accuracy_b_mean,accuracy_b_std,"
          "relative_loss_a_mean,relative_loss_a_std,relative_loss_b_mean,"
          "relative_loss_b_std,accuracy_delta_mean\n";
    if (arm_a.empty()) return;
    for (const auto& row : arm_a.front().sweep.rows) {
      std::vector<double> acc_a, acc_b, rel_a, rel_b, delta;
      for (std::size_t r = 0; r < arm_a.size(); ++r) {
        const auto* ra = arm_a[r].sweep.at(row.percentile);
        const auto* rb = arm_b[r].sweep.at(row.percentile);
        acc_a.push_back(ra->accuracy);
        acc_b.push_back(rb->accuracy);
        rel_a.push_back(ra->relative_loss);
        rel_b.push_back(rb->relative_loss);
        delta.push_back(rb->accuracy - ra->accuracy);
      }
      using detail::mean_of;
      using detail::num;
      using detail::std_of;
      os << num(row.percentile) << ',' << num(mean_of(acc_a)) << ','
         << num(std_of(acc_a)) << ',' << num(mean_of(acc_b)) << ','
         << num(std_of(acc_b)) << ',' << num(mean_of(rel_a)) << ','
         << num(std_of(rel_a)) << ',' << num(mean_of(rel_b)) << ','
         << num(std_of(rel_b)) << ',' << num(mean_of(delta)) << '\n';
    }
  }

  nlohmann::json summary_json() const {
    auto arm = [](const ExperimentConfig& c, const std::vector<ArmResult>& rs) {
      nlohmann::json runs = nlohmann::json::array();
      std::vector<double> acc, spread;
      for (const auto& r : rs) {
        runs.push_back({{"seed", r.seed},
                        {"accuracy", r.accuracy},
                        {"weight_std", r.weight_std},
                        {"fraction_unit_open", r.fraction_unit_open}});
        acc.push_back(r.accuracy);
        spread.push_back(r.weight_std);
      }
      return nlohmann::json{{"optimizer", to_string(c.optimizer)},
                            {"hyper", to_json(c.hyper)},
                            {"runs", runs},
                            {"accuracy_mean", detail::mean_of(acc)},
                            {"accuracy_std", detail::std_of(acc)},
                            {"weight_std_mean", detail::mean_of(spread)},
                            {"weight_std_std", detail::std_of(spread)}};
    };
    return {{"a", arm(a, arm_a)}, {"b", arm(b, arm_b)}};
  }
};

// Settings an arm may change; everything else must match for the comparison
// to be meaningful.
inline const std::set<std::string>& optimizer_setting_keys() {
  static const std::set<std::string> keys = {
      "optimizer", "lr", "beta1", "beta2", "epsilon",
      "delta", "sampling_rate", "bias_correction", "out_dir"};
  return keys;
}

inline void check_comparable(const ExperimentConfig& a, const ExperimentConfig& b) {
  const auto sa = to_settings(a);
  const auto sb = to_settings(b);
  std::string differing;
  for (const auto& [k, v] : sa) {
    if (optimizer_setting_keys().count(k)) continue;
    if (sb.at(k) != v) differing += (differing.empty() ? "" : ", ") + k;
  }
  if (!differing.empty()) {
    throw ConfigError("compared configurations may differ only in optimizer "
                      "settings; they differ in: " + differing);
  }
}

// Trains both arms on seeds seed, seed + 1, ... seed + seeds - 1. Each seed
// generates one dataset that both arms share. Per-run artifacts go to
// <out_dir>/seed_<s>/{a,b}; compare.csv, compare_summary.csv and
// compare.json go to <a.out_dir>.
inline CompareReport compare(const ExperimentConfig& a, const ExperimentConfig& b,
                             bool write_outputs = true) {
  a.validate();
  b.validate();
  check_comparable(a, b);
  CompareReport report{a, b, {}, {}};
  const fs::path root = a.out_dir;
  for (std::size_t r = 0; r < a.seeds; ++r) {
    const std::uint64_t seed = a.seed + r;
    ExperimentConfig ca = a, cb = b;
    ca.seed = cb.seed = seed;
    ca.out_dir = (root / ("seed_" + std::to_string(seed)) / "a").string();
    cb.out_dir = (root / ("seed_" + std::to_string(seed)) / "b").string();
    const DataSplits data = load_data(ca);
    for (auto* side : {&ca, &cb}) {
      const TrainResult tr = train(*side, data, write_outputs);
      const auto h = weight_histogram(tr.model, side->histogram_bins,
                                      side->histogram_lo, side->histogram_hi);
      ArmResult arm;
      arm.seed = seed;
      arm.accuracy = tr.test_accuracy;
      arm.weight_std = h.stddev;
      arm.fraction_unit_open = h.fraction_unit_open;
      arm.sweep = sweep(tr.model, data.test, side->grid, side->prune_mode,
                        side->confusion);
      if (write_outputs) write_sweep_outputs(arm.sweep, side->out_dir);
      (side == &ca ? report.arm_a : report.arm_b).push_back(std::move(arm));
    }
  }
  if (write_outputs) {
    std::ostringstream rows, summary;
    report.write_csv(rows);
    report.write_summary_csv(summary);
    detail::write_text(root / "compare.csv", rows.str());
    detail::write_text(root / "compare_summary.csv", summary.str());
    detail::write_json(root / "compare.json", report.summary_json());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Inspection and evaluation

struct InspectReport {
  WeightHistogram histogram;
  std::size_t parameters = 0;
  nlohmann::json per_tensor = nlohmann::json::array();

  nlohmann::json to_json() const {
    nlohmann::json j = histogram.summary_json();
    j["parameters"] = parameters;
    j["tensors"] = per_tensor;
    return j;
  }
};

inline InspectReport inspect(const Model& model, std::size_t bins = 101,
                             double lo = -1.5, double hi = 1.5) {
  InspectReport out;
  out.histogram = weight_histogram(model, bins, lo, hi);
  out.parameters = model.parameter_count();
  for (const auto& p : model.parameters()) {
    const auto h = weight_histogram(p.value->data(), bins, lo, hi);
    out.per_tensor.push_back({{"name", p.name},
                              {"shape", p.value->shape()},
                              {"prunable", p.prunable},
                              {"mean", h.mean},
                              {"std", h.stddev},
                              {"fraction_zero", h.fraction_zero}});
  }
  return out;
}

inline void write_inspect_outputs(const InspectReport& report, const fs::path& dir) {
  std::ostringstream os;
  report.histogram.write_csv(os);
  detail::write_text(dir / "histogram.csv", os.str());
  detail::write_json(dir / "inspect.json", report.to_json());
}

struct EvalReport {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

inline EvalReport evaluate(const Model& model, const Dataset& test) {
  EvalReport out;
  out.confusion = confusion_matrix(model, test.features, test.labels);
  out.accuracy = out.confusion.accuracy();
  return out;
}

inline void write_eval_outputs(const EvalReport& report, const Dataset& test,
                               const fs::path& dir) {
  std::ostringstream os;
  report.confusion.write_csv(os);
  detail::write_text(dir / "confusion.csv", os.str());
  detail::write_json(dir / "eval.json", {{"accuracy", report.accuracy},
                                         {"samples", test.size()},
                                         {"dataset", test.provenance}});
}

}  // namespace sgap
