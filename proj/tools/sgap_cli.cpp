#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sgap/checkpoint.hpp"
#include "sgap/config.hpp"
#include "sgap/experiment.hpp"

namespace {

using Settings = std::vector<std::pair<std::string, std::string>>;

struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> values;  // key -> flag value
  std::vector<std::string> sets;              // raw key=value overrides
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "flat key=value config file");
  const std::pair<const char*, const char*> flags[] = {
      {"--seed", "seed"},
      {"--out-dir", "out_dir"},
      {"--optimizer", "optimizer"},
      {"--sampling-rate", "sampling_rate"},
      {"--lr", "lr"},
      {"--delta", "delta"},
      {"--epochs", "epochs"},
      {"--batch-size", "batch_size"},
      {"--grid", "grid"},
      {"--dataset", "dataset"},
      {"--prune-mode", "prune_mode"},
      {"--bias-correction", "bias_correction"},
      {"--seeds", "seeds"},
  };
  for (const auto& [flag, key] : flags) {
    const std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&f, k](const std::string& v) { f.values[k] = v; }, k);
  }
  cmd->add_option("--set", f.sets, "extra key=value setting (repeatable)");
}

std::pair<std::string, std::string> split_setting(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) {
    throw sgap::ConfigError("expected key=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// defaults (or checkpoint) <- config file <- --set <- named flags
sgap::ExperimentConfig resolve(const CommonFlags& f, sgap::ExperimentConfig base = {}) {
  if (!f.config.empty()) {
    base = sgap::config_from_settings(sgap::read_settings_file(f.config), base);
  }
  for (const auto& s : f.sets) {
    const auto [k, v] = split_setting(s);
    sgap::apply_setting(base, k, v);
  }
  for (const auto& [k, v] : f.values) sgap::apply_setting(base, k, v);
  base.validate();
  return base;
}

struct Loaded {
  sgap::Checkpoint checkpoint;
  sgap::ExperimentConfig config;
};

Loaded load_for(const std::string& path, const CommonFlags& f) {
  Loaded out{sgap::load_checkpoint(path), {}};
  auto base = sgap::config_from_checkpoint(out.checkpoint.meta);
  base.out_dir = std::filesystem::path(path).parent_path().string();
  if (base.out_dir.empty()) base.out_dir = ".";
  out.config = resolve(f, base);
  return out;
}

void print_sweep(const sgap::SweepReport& report) {
  std::printf("%6s %12s %8s %9s %9s\n", "P", "psi", "pruned", "accuracy",
              "rel.loss");
  for (const auto& row : report.rows) {
    std::printf("%6g %12.6g %8.4f %9.4f %9s\n", row.percentile, row.threshold,
                row.pruned_fraction, row.accuracy,
                sgap::format_relative_loss(row.relative_loss).c_str());
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Stochastic gradient sampling and magnitude pruning experiments"};
  app.require_subcommand(1);

  CommonFlags train_f, sweep_f, compare_f, inspect_f, eval_f;
  std::string sweep_ck, inspect_ck, eval_ck, config_a, config_b;
  std::vector<std::string> sets_a, sets_b;
  bool sweep_confusion = false;

  auto* train_cmd = app.add_subcommand("train", "train one model");
  add_common(train_cmd, train_f);

  auto* sweep_cmd = app.add_subcommand("sweep", "prune a checkpoint over a grid");
  add_common(sweep_cmd, sweep_f);
  sweep_cmd->add_option("--checkpoint", sweep_ck)->required();
  sweep_cmd->add_flag("--confusion", sweep_confusion, "write confusion matrices");

  auto* compare_cmd = app.add_subcommand("compare", "train and sweep two optimizers");
  add_common(compare_cmd, compare_f);
  compare_cmd->add_option("--config-a", config_a, "config file layered onto arm a");
  compare_cmd->add_option("--config-b", config_b, "config file layered onto arm b");
  compare_cmd->add_option("--a", sets_a, "key=value for arm a (default optimizer=adam)");
  compare_cmd->add_option("--b", sets_b,
                          "key=value for arm b (default optimizer=stochgradadam)");

  auto* inspect_cmd = app.add_subcommand("inspect", "weight histogram of a checkpoint");
  add_common(inspect_cmd, inspect_f);
  inspect_cmd->add_option("--checkpoint", inspect_ck)->required();

  auto* eval_cmd = app.add_subcommand("eval", "test accuracy and confusion matrix");
  add_common(eval_cmd, eval_f);
  eval_cmd->add_option("--checkpoint", eval_ck)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train_cmd) {
    const auto c = resolve(train_f);
    const auto r = sgap::train(c);
    std::printf("trained %zu epochs (%llu steps) with %s: test accuracy %.4f\n",
                r.log.epochs.size(), static_cast<unsigned long long>(r.optimizer.t),
                sgap::to_string(c.optimizer).c_str(), r.test_accuracy);
    if (r.bounds) {
      const auto check = r.bounds->check();
      std::printf("bound chain over %zu components: left %s (%zu violations), "
                  "right %s (%zu violations)\n",
                  check.components, check.left_ok() ? "holds" : "violated",
                  check.left_violations, check.right_ok() ? "holds" : "violated",
                  check.right_violations);
    }
    std::printf("outputs in %s\n", c.out_dir.c_str());
  } else if (*sweep_cmd) {
    const auto loaded = load_for(sweep_ck, sweep_f);
    const auto data = sgap::load_data(loaded.config);
    const auto report = sgap::sweep(loaded.checkpoint.model, data.test,
                                    loaded.config.grid, loaded.config.prune_mode,
                                    sweep_confusion || loaded.config.confusion);
    sgap::write_sweep_outputs(report, loaded.config.out_dir);
    print_sweep(report);
  } else if (*compare_cmd) {
    sgap::ExperimentConfig base = resolve(compare_f);
    auto a = base, b = base;
    a.optimizer = sgap::OptimizerKind::kAdam;
    b.optimizer = sgap::OptimizerKind::kStochGradAdam;
    if (!config_a.empty()) a = sgap::config_from_settings(sgap::read_settings_file(config_a), a);
    if (!config_b.empty()) b = sgap::config_from_settings(sgap::read_settings_file(config_b), b);
    for (const auto& s : sets_a) {
      const auto [k, v] = split_setting(s);
      sgap::apply_setting(a, k, v);
    }
    for (const auto& s : sets_b) {
      const auto [k, v] = split_setting(s);
      sgap::apply_setting(b, k, v);
    }
    const auto report = sgap::compare(a, b);
    const auto j = report.summary_json();
    std::printf("arm a (%s): accuracy %.4f +- %.4f, weight std %.4f\n",
                sgap::to_string(a.optimizer).c_str(),
                j["a"]["accuracy_mean"].get<double>(),
                j["a"]["accuracy_std"].get<double>(),
                j["a"]["weight_std_mean"].get<double>());
    std::printf("arm b (%s): accuracy %.4f +- %.4f, weight std %.4f\n",
                sgap::to_string(b.optimizer).c_str(),
                j["b"]["accuracy_mean"].get<double>(),
                j["b"]["accuracy_std"].get<double>(),
                j["b"]["weight_std_mean"].get<double>());
    std::printf("outputs in %s\n", a.out_dir.c_str());
  } else if (*inspect_cmd) {
    const auto loaded = load_for(inspect_ck, inspect_f);
    const auto& c = loaded.config;
    const auto report = sgap::inspect(loaded.checkpoint.model, c.histogram_bins,
                                      c.histogram_lo, c.histogram_hi);
    sgap::write_inspect_outputs(report, c.out_dir);
    const auto& h = report.histogram;
    std::printf("%llu weights: mean %.6f std %.6f, 0<|w|<1 %.4f, zero %.4f\n",
                static_cast<unsigned long long>(h.total), h.mean, h.stddev,
                h.fraction_unit_open, h.fraction_zero);
  } else if (*eval_cmd) {
    const auto loaded = load_for(eval_ck, eval_f);
    const auto data = sgap::load_data(loaded.config);
    const auto report = sgap::evaluate(loaded.checkpoint.model, data.test);
    sgap::write_eval_outputs(report, data.test, loaded.config.out_dir);
    std::printf("test accuracy %.4f on %zu samples\n", report.accuracy,
                data.test.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sgap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sgap::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const sgap::FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const sgap::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
