// qrlforge command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qrlforge/qrlforge.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int exit_code(qrl_status s) {
  switch (s) {
    case QRL_OK: return kExitOk;
    case QRL_CONFIG_ERROR:
    case QRL_ARGUMENT_ERROR: return kExitConfig;
    default: return kExitRuntime;
  }
}

int fail(qrl_status s) {
  std::cerr << "error: " << qrl_last_error() << '\n';
  return exit_code(s);
}

void print_results(const qrl_results* r) {
  std::printf("run_name,seed,ok,final_return_mean,total_env_steps,total_circuit_executions,wall_time_s,metrics_path\n");
  for (size_t i = 0; i < qrl_results_count(r); ++i) {
    std::printf("%s,%llu,%d,%.6g,%llu,%llu,%.3f,%s\n", qrl_result_run_name(r, i),
                static_cast<unsigned long long>(qrl_result_seed(r, i)), qrl_result_ok(r, i),
                qrl_result_final_return(r, i),
                static_cast<unsigned long long>(qrl_result_env_steps(r, i)),
                static_cast<unsigned long long>(qrl_result_circuit_executions(r, i)),
                qrl_result_wall_time(r, i), qrl_result_metrics_path(r, i));
    if (!qrl_result_ok(r, i)) std::cerr << "trial failed: " << qrl_result_error(r, i) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qrlforge: classical and quantum reinforcement learning experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string output_dir;
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--output-dir", output_dir, "Override the output root (else $QRLFORGE_OUTPUT_DIR)");

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a single agent from a config file");
  train->add_option("--config", config_path, "Run config (JSON)")->required();

  std::vector<std::string> batch_paths;
  bool continue_on_error = false;
  auto* batch = app.add_subcommand("batch", "Train a list of configs sequentially");
  batch->add_option("--configs", batch_paths, "Run configs (JSON)")->required();
  batch->add_flag("--continue-on-error", continue_on_error, "Keep going after a failed trial");

  std::string grid_path;
  long long max_parallel = 1;
  auto* tune = app.add_subcommand("tune", "Grid search with parallel trials");
  tune->add_option("--grid", grid_path, "Grid spec (JSON)")->required();
  tune->add_option("--max-parallel", max_parallel, "Concurrent trials")->capture_default_str();

  std::vector<std::string> patterns;
  std::optional<double> threshold;
  auto* report = app.add_subcommand("report", "Summarize metrics files as CSV");
  report->add_option("--metrics", patterns, "Metrics files or glob patterns")->required();
  report->add_option("--threshold", threshold, "Return threshold for steps-to-threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return kExitConfig;
  }

  qrl_overrides ov{};
  if (seed) {
    ov.has_seed = 1;
    ov.seed = *seed;
  }
  if (!output_dir.empty()) ov.output_dir = output_dir.c_str();

  if (*train) {
    qrl_config* cfg = nullptr;
    if (qrl_status s = qrl_config_load(config_path.c_str(), &cfg); s != QRL_OK) {
      std::cerr << "error: " << qrl_last_error() << '\n';
      return kExitConfig;
    }
    for (size_t i = 0; i < qrl_config_warning_count(cfg); ++i) {
      std::cerr << "warning: " << qrl_config_warning(cfg, i) << '\n';
    }
    qrl_results* res = nullptr;
    const qrl_status s = qrl_run_single(cfg, &ov, &res);
    qrl_config_free(cfg);
    if (s != QRL_OK) return fail(s);
    print_results(res);
    qrl_results_free(res);
    return kExitOk;
  }

  if (*batch) {
    std::vector<const char*> p;
    for (const auto& b : batch_paths) p.push_back(b.c_str());
    qrl_results* res = nullptr;
    const qrl_status s = qrl_run_batch(p.data(), p.size(), continue_on_error ? 1 : 0, &ov, &res);
    if (s != QRL_OK) {
      std::cerr << "error: " << qrl_last_error() << '\n';
      return s == QRL_IO_ERROR ? kExitConfig : exit_code(s);
    }
    print_results(res);
    int code = kExitOk;
    for (size_t i = 0; i < qrl_results_count(res); ++i) {
      if (!qrl_result_ok(res, i)) code = kExitRuntime;
    }
    qrl_results_free(res);
    return code;
  }

  if (*tune) {
    if (max_parallel < 1) {
      std::cerr << "error: --max-parallel must be at least 1\n";
      return kExitConfig;
    }
    qrl_results* res = nullptr;
    const qrl_status s = qrl_tune(grid_path.c_str(), static_cast<size_t>(max_parallel), &ov, &res);
    if (s != QRL_OK) {
      std::cerr << "error: " << qrl_last_error() << '\n';
      return s == QRL_IO_ERROR ? kExitConfig : exit_code(s);
    }
    print_results(res);
    std::cerr << "summary: " << qrl_results_summary_path(res) << '\n';
    size_t ok = 0;
    for (size_t i = 0; i < qrl_results_count(res); ++i) ok += qrl_result_ok(res, i) ? 1 : 0;
    const bool all_failed = qrl_results_count(res) > 0 && ok == 0;
    qrl_results_free(res);
    return all_failed ? kExitRuntime : kExitOk;
  }

  std::vector<const char*> p;
  for (const auto& m : patterns) p.push_back(m.c_str());
  char* csv = nullptr;
  const qrl_status s = qrl_report(p.data(), p.size(), threshold.value_or(0.0), threshold ? 1 : 0, &csv);
  if (s != QRL_OK) return fail(s);
  std::fputs(csv, stdout);
  qrl_string_free(csv);
  return kExitOk;
}
