// Acceptance checks. Each criterion prints one PASS/FAIL line; run with
// --criterion <name> for a single one, or with no arguments for all of them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sgap/experiment.hpp"
#include "support/cifar_writer.hpp"
#include "support/reference_net.hpp"

namespace fs = std::filesystem;
using namespace sgap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool report_only = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const auto dir = fs::current_path() / "acceptance_out" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<float> flatten(const Model& m) {
  std::vector<float> out;
  for (const auto& p : m.parameters()) {
    out.insert(out.end(), p.value->data().begin(), p.value->data().end());
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::size_t checked = 0, skipped = 0, failures = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    ResidualBlock block;
    block.inner.emplace_back(Dense(6, 5));
    block.inner.emplace_back(Relu{});
    block.inner.emplace_back(Dense(5, 6, false));
    Model model({Dense(4, 6), Relu{}, block, Relu{}, block, Dense(6, 3),
                 SoftmaxCrossEntropy{3}});
    for (auto& p : model.parameters()) {
      for (float& w : p.value->data()) w = rng.uniform(-1.0f, 1.0f);
    }
    Tensor x({8, 4});
    for (float& v : x.data()) v = rng.uniform(-2.0f, 2.0f);
    std::vector<int> y(8);
    for (auto& t : y) t = static_cast<int>(rng.below(3));
    const auto r = testing::gradient_check(model, x, y, 1e-3, 1e-2);
    checked += r.checked;
    skipped += r.skipped_kinks;
    failures += r.failures;
    worst = std::max(worst, r.worst_relative_error);
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 10.0 && checked > 0,
          fmt("20 seeds, %zu components checked, %zu kinks skipped, %zu over 1e-2, "
              "worst rel err %.2e, %.2fs",
              checked, skipped, failures, worst, secs)};
}

Model two_layer(std::uint64_t seed) {
  Model m({Dense(8, 16), Relu{}, Dense(16, 4), SoftmaxCrossEntropy{4}});
  Rng rng(seed);
  init_he_uniform(m, rng);
  return m;
}

Outcome optimizer_equivalence() {
  const auto t0 = Clock::now();
  Model a = two_layer(3), b = two_layer(3);
  HyperParams h;
  h.sampling_rate = 1.0;
  h.delta = 1.0;
  auto sa = make_optimizer_state(OptimizerKind::kAdam, h, a, 1);
  auto sb = make_optimizer_state(OptimizerKind::kStochGradAdam, h, b, 2);
  auto pa = parameter_tensors(a);
  auto pb = parameter_tensors(b);
  Rng data(17);
  double worst = 0.0;
  for (int step = 0; step < 100; ++step) {
    Tensor x({32, 8});
    for (float& v : x.data()) v = static_cast<float>(data.normal());
    std::vector<int> y(32);
    for (auto& t : y) t = static_cast<int>(data.below(4));
    a.forward(x);
    b.forward(x);
    const auto ga = a.backward(y);
    const auto gb = b.backward(y);
    adam_step(sa, pa, ga.grads);
    stochgradadam_step(sb, pb, gb.grads);
    const auto fa = flatten(a), fb = flatten(b);
    for (std::size_t i = 0; i < fa.size(); ++i) {
      worst = std::max(worst, std::fabs(static_cast<double>(fa[i]) - fb[i]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 5.0,
          fmt("100 steps, max |theta_adam - theta_sga| = %.3g, %.3fs", worst, secs)};
}

Outcome hand_oracle() {
  const double expect = -0.01 * 2.0 / (2.0 + 1e-7);
  double worst = 0.0;
  std::string values;
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kStochGradAdam}) {
    HyperParams h;
    h.sampling_rate = 1.0;
    const Shape s{1};
    OptimizerState st(kind, h, std::span<const Shape>(&s, 1), 1);
    Tensor theta({1}, {0.0f});
    const std::vector<Tensor> g = {Tensor({1}, {2.0f})};
    Tensor* params[] = {&theta};
    optimizer_step(st, params, g);
    worst = std::max(worst, std::fabs(theta[0] - expect));
    values += fmt(" %s=%.9f", to_string(kind).c_str(), theta[0]);
  }
  return {worst <= 1e-7, fmt("theta=0, g=2 ->%s (expect %.9f, max err %.2e)",
                             values.c_str(), expect, worst)};
}

Outcome mask_statistics() {
  Model m = two_layer(5);
  HyperParams h;
  h.sampling_rate = 0.8;
  auto st = make_optimizer_state(OptimizerKind::kStochGradAdam, h, m, 99);
  auto params = parameter_tensors(m);
  std::vector<Tensor> grads;
  for (const auto& s : parameter_shapes(m)) {
    Tensor g(s);
    g.fill(1e-3f);
    grads.push_back(std::move(g));
  }
  double kept = 0.0, total = 0.0;
  for (int step = 0; step < 1000; ++step) {
    const auto stats = stochgradadam_step(st, params, grads);
    kept += static_cast<double>(stats.kept);
    total += static_cast<double>(stats.total);
  }
  const double mean = kept / total;
  const double sigma = std::sqrt(0.8 * 0.2 / total);
  const double z = (mean - 0.8) / sigma;
  return {std::fabs(z) <= 3.0,
          fmt("1000 steps, keep fraction %.6f, %.2f sigma from 0.8 (sigma %.2e)",
              mean, z, sigma)};
}

Outcome bound_chain() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.epochs = 5;
  const auto data = load_data(c);
  std::string detail;
  bool all_left = true, all_right = true;
  for (double s : {0.2, 0.8, 1.0}) {
    c.hyper.sampling_rate = s;
    Model model = build_residual_mlp(model_spec_for(c, data.train));
    Rng init(c.seed, streams::kInit);
    init_he_uniform(model, init);
    auto st = make_optimizer_state(OptimizerKind::kStochGradAdam, c.hyper, model,
                                   derive_seed(c.seed, streams::kMask));
    const auto shapes = parameter_shapes(model);
    Rng pick(c.seed, streams::kTracking);
    // 16 tensors x 4 = 64 components.
    BoundTracker acc(select_components(shapes, 4, pick));
    auto params = parameter_tensors(model);
    Rng shuffle(c.seed, streams::kShuffle);
    std::vector<std::size_t> order(data.train.size());
    std::vector<Tensor> sampled;
    std::size_t left_bad_steps = 0, right_bad_steps = 0, steps = 0;
    BoundCheck last;
    for (std::size_t e = 0; e < c.epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle.shuffle(order.begin(), order.end());
      for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
        const std::size_t bs = std::min(c.batch_size, order.size() - start);
        Tensor x({bs, data.train.dims()});
        std::vector<int> y(bs);
        for (std::size_t b = 0; b < bs; ++b) {
          auto row = data.train.features.row(order[start + b]);
          std::copy(row.begin(), row.end(), x.row(b).begin());
          y[b] = data.train.labels[order[start + b]];
        }
        model.forward(x);
        const auto g = model.backward(y);
        stochgradadam_step(st, params, g.grads, &sampled);
        acc.update(g.grads, sampled, st.t);
        last = acc.check();
        left_bad_steps += !last.left_ok();
        right_bad_steps += !last.right_ok();
        ++steps;
      }
    }
    all_left = all_left && left_bad_steps == 0;
    all_right = all_right && right_bad_steps == 0;
    detail += fmt(" [s=%.1f: %zu comps, %zu steps; left violated at %zu steps "
                  "(worst ratio %.4f); right violated at %zu steps (final %zu/%zu "
                  "comps, worst ratio %.3g)]",
                  s, last.components, steps, left_bad_steps, last.worst_left_ratio,
                  right_bad_steps, last.right_violations, last.components,
                  last.worst_right_ratio);
  }
  const double secs = seconds_since(t0);
  return {all_left && all_right && secs < 60.0,
          fmt("left inequality %s, right inequality %s, %.1fs;",
              all_left ? "holds" : "FAILS", all_right ? "holds" : "FAILS", secs) +
              detail};
}

Outcome pruning_exactness() {
  const std::size_t n = 10000;
  Model model({Dense(100, 100), SoftmaxCrossEntropy{100}});
  Rng rng(2024);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm.begin(), perm.end());
  auto& w = *model.parameters()[0].value;
  for (std::size_t i = 0; i < n; ++i) {
    const float mag = static_cast<float>(perm[i] + 1) / static_cast<float>(n);
    w[i] = (rng.uniform() < 0.5f ? -mag : mag);
  }
  const auto original = w.values();
  std::vector<float> sorted(n);
  std::transform(original.begin(), original.end(), sorted.begin(),
                 [](float v) { return std::fabs(v); });
  std::sort(sorted.begin(), sorted.end());

  std::size_t problems = 0;
  double prev_fraction = -1.0;
  std::string first_problem;
  auto flag = [&](const std::string& what) {
    if (problems++ == 0) first_problem = what;
  };
  for (int p = 5; p <= 70; p += 5) {
    auto res = prune_at_rate(model, p);
    const auto& pw = *res.model.parameters()[0].value;
    const auto idx = static_cast<std::size_t>(
        std::ceil(static_cast<double>(p) * static_cast<double>(n) / 100.0));
    const float psi = sorted[idx - 1];
    if (res.report.threshold != psi) flag(fmt("P=%d threshold mismatch", p));
    std::size_t pruned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool should = std::fabs(original[i]) < psi;
      pruned += should;
      const float expect = should ? 0.0f : original[i];
      const float got = pw[i];
      if (std::memcmp(&got, &expect, sizeof(float)) != 0) {
        flag(fmt("P=%d element %zu differs from oracle", p, i));
      }
    }
    const double fraction = res.report.pruned_fraction();
    if (pruned != res.report.pruned_count) flag(fmt("P=%d count mismatch", p));
    if (std::fabs(fraction - p / 100.0) > 1.0 / n + 1e-12) {
      flag(fmt("P=%d fraction %.6f", p, fraction));
    }
    if (fraction < prev_fraction) flag(fmt("P=%d not monotone", p));
    prev_fraction = fraction;
    Model again = res.model;
    apply_pruning(again, res.report.threshold);
    if (flatten(again) != flatten(res.model)) flag(fmt("P=%d not idempotent", p));
  }
  if (w.values() != original) flag("input model modified");
  return {problems == 0,
          problems ? fmt("%zu problems, first: %s", problems, first_problem.c_str())
                   : std::string("10000 distinct weights, P=5..70: oracle match, "
                                 "fractions within 1/|W|, idempotent, monotone")};
}

Outcome relative_loss() {
  const auto a = format_relative_loss(relative_accuracy_loss(83.95, 62.84));
  const auto b = format_relative_loss(relative_accuracy_loss(85.64, 85.67));
  return {a == "25.15%" && b == "+0.04%",
          "83.95->62.84 gives " + a + ", 85.64->85.67 gives " + b};
}

CompareReport headline_compare(const fs::path& dir, bool write) {
  ExperimentConfig a;
  a.seeds = 5;
  a.optimizer = OptimizerKind::kAdam;
  a.out_dir = dir.string();
  ExperimentConfig b = a;
  b.optimizer = OptimizerKind::kStochGradAdam;
  b.hyper.sampling_rate = 0.8;
  return compare(a, b, write);
}

Outcome headline() {
  const auto t0 = Clock::now();
  const auto dir = work_dir("headline");
  const auto report = headline_compare(dir, true);
  const double acc_a = detail::mean_of(report.accuracies(false));
  const double acc_b = detail::mean_of(report.accuracies(true));
  const auto losses = report.relative_losses(50.0);
  const double rel_a = detail::mean_of(losses->first);
  const double rel_b = detail::mean_of(losses->second);
  const bool part_a = acc_b >= acc_a - 0.01;
  bool part_b = rel_b < rel_a;
  std::string how = "mean";
  std::size_t wins = 0;
  for (std::size_t r = 0; r < losses->first.size(); ++r) {
    wins += losses->second[r] < losses->first[r];
  }
  if (!part_b) {
    how = fmt("mean failed, seed majority %zu/5 (paired sweep in %s)", wins,
              (dir / "compare.csv").string().c_str());
    part_b = wins >= 3;
  }
  const double secs = seconds_since(t0);
  return {part_a && part_b && secs < 900.0,
          fmt("(a) accuracy sga %.4f vs adam %.4f [%s]; (b) rel loss at P=50 "
              "sga %.2f%% vs adam %.2f%%, sga lower on %zu/5 seeds [%s, %s]; %.0fs",
              acc_b, acc_a, part_a ? "ok" : "fail", rel_b, rel_a, wins,
              part_b ? "ok" : "fail", how.c_str(), secs)};
}

Outcome weight_spread() {
  const auto report = headline_compare(work_dir("weight_spread"), false);
  const double sa = detail::mean_of(report.weight_stds(false));
  const double sb = detail::mean_of(report.weight_stds(true));
  Outcome out{sb >= sa,
              fmt("mean weight std sga %.5f vs adam %.5f (%s)", sb, sa,
                  sb >= sa ? "sga wider" : "sga narrower"),
              true};
  return out;
}

Outcome determinism() {
  const auto dir = work_dir("determinism");
  ExperimentConfig c;
  c.out_dir = dir.string();
  c.track_bounds = true;
  c.confusion = true;
  std::vector<std::pair<std::string, std::string>> first;
  for (int round = 0; round < 2; ++round) {
    const auto r = train(c);
    const auto data = load_data(c);
    write_sweep_outputs(sweep(r.model, data.test, c.grid, c.prune_mode, true), dir);
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      files.emplace_back(e.path().filename().string(), slurp(e.path()));
    }
    std::sort(files.begin(), files.end());
    if (round == 0) {
      first = std::move(files);
    } else {
      std::string bad;
      for (std::size_t i = 0; i < std::min(first.size(), files.size()); ++i) {
        if (first[i] != files[i]) bad += " " + files[i].first;
      }
      if (first.size() != files.size()) bad += " (file count differs)";
      return {bad.empty(), bad.empty()
                               ? fmt("%zu output files byte-identical across two runs",
                                     files.size())
                               : "differing:" + bad};
    }
  }
  return {false, "unreachable"};
}

Outcome cifar_reader() {
  const auto dir = work_dir("cifar");
  auto label = [](std::size_t r) { return static_cast<std::uint8_t>((r * 7) % 10); };
  auto pixel = [](std::size_t r, std::size_t p) {
    return static_cast<std::uint8_t>((r * 31 + p * 17) % 256);
  };
  auto bytes = testing::make_cifar_bytes(cifar::kRecordsPerFile, label, pixel);
  testing::write_file(dir / "batch.bin", bytes);
  std::size_t wrong = 0;
  const auto ds = load_cifar10_file(dir / "batch.bin");
  for (std::size_t r = 0; r < ds.size(); ++r) {
    wrong += ds.labels[r] != label(r);
    auto row = ds.features.row(r);
    for (std::size_t p = 0; p < cifar::kPixelBytes; ++p) {
      wrong += row[p] != static_cast<float>(pixel(r, p)) / 255.0f;
    }
  }

  std::vector<std::string> rejections;
  auto expect_reject = [&](const std::vector<std::uint8_t>& b,
                           const std::string& needle) {
    testing::write_file(dir / "bad.bin", b);
    try {
      load_cifar10_file(dir / "bad.bin");
    } catch (const DataError& e) {
      if (std::string(e.what()).find(needle) != std::string::npos) {
        rejections.push_back(e.what());
        return;
      }
    }
    ++wrong;
  };
  auto shorter = bytes;
  shorter.pop_back();
  expect_reject(shorter, "found 30729999");
  auto longer = bytes;
  longer.push_back(0);
  expect_reject(longer, "found 30730001");
  auto bad_label = bytes;
  bad_label[5 * cifar::kRecordBytes] = 10;
  expect_reject(bad_label, "byte offset 15365");
  return {wrong == 0,
          fmt("10000-record file round-trips (%zu mismatches); short, long and "
              "bad-label files rejected %zu/3",
              wrong, rejections.size())};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"gradient_check", gradient_check},
    {"optimizer_equivalence", optimizer_equivalence},
    {"hand_oracle", hand_oracle},
    {"mask_statistics", mask_statistics},
    {"bound_chain", bound_chain},
    {"pruning_exactness", pruning_exactness},
    {"relative_loss", relative_loss},
    {"headline", headline},
    {"weight_spread", weight_spread},
    {"determinism", determinism},
    {"cifar_reader", cifar_reader},
};

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = argv[++i];
    if (std::strcmp(argv[i], "--list") == 0) {
      for (const auto& c : kCriteria) std::printf("%s\n", c.name);
      return 0;
    }
  }
  int failed = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && only != c.name) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const char* tag = o.report_only ? (o.pass ? "PASS" : "REPORT")
                                    : (o.pass ? "PASS" : "FAIL");
    std::printf("%s %s: %s\n", tag, c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && !o.report_only) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return failed ? 1 : 0;
}
