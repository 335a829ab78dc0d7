#include "qrlforge/qrlforge.h"

#include <cstring>
#include <string>
#include <vector>

#include "qrlforge/error.hpp"
#include "qrlforge/metrics.hpp"
#include "qrlforge/runner.hpp"

using namespace qrlforge;

struct qrl_config {
  runner::RunConfig config;
};

struct qrl_results {
  std::vector<runner::TrialResult> items;
  std::vector<std::string> names;
  std::vector<std::string> metrics;
  std::string summary_path;

  void finish() {
    for (const auto& r : items) {
      names.push_back(r.config.run_name);
      metrics.push_back(r.metrics_path.string());
    }
  }
};

namespace {

thread_local std::string g_last_error;

qrl_status status_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config: return QRL_CONFIG_ERROR;
    case ErrorCode::Argument:
    case ErrorCode::Index:
    case ErrorCode::Capacity:
    case ErrorCode::UnsupportedBinding: return QRL_ARGUMENT_ERROR;
    case ErrorCode::Io: return QRL_IO_ERROR;
    default: return QRL_RUNTIME_ERROR;
  }
}

template <class F>
qrl_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return QRL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return QRL_RUNTIME_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return QRL_RUNTIME_ERROR;
  }
}

runner::Overrides to_overrides(const qrl_overrides* o) {
  runner::Overrides out;
  if (!o) return out;
  if (o->has_seed) out.seed = o->seed;
  if (o->output_dir) out.output_dir = std::string(o->output_dir);
  return out;
}

const runner::TrialResult* item(const qrl_results* r, size_t i) {
  if (!r || i >= r->items.size()) return nullptr;
  return &r->items[i];
}

}  // namespace

extern "C" {

const char* qrl_version(void) { return "0.1.0"; }

const char* qrl_last_error(void) { return g_last_error.c_str(); }

qrl_status qrl_config_load(const char* path, qrl_config** out) {
  return guarded([&] {
    if (!path || !out) throw ArgumentError("qrl_config_load: null argument");
    *out = nullptr;
    auto c = std::make_unique<qrl_config>();
    c->config = runner::load_config(path);
    c->config.validate();
    *out = c.release();
  });
}

void qrl_config_free(qrl_config* config) { delete config; }

const char* qrl_config_run_name(const qrl_config* config) {
  return config ? config->config.run_name.c_str() : "";
}

size_t qrl_config_warning_count(const qrl_config* config) {
  return config ? config->config.warnings.size() : 0;
}

const char* qrl_config_warning(const qrl_config* config, size_t index) {
  if (!config || index >= config->config.warnings.size()) return "";
  return config->config.warnings[index].c_str();
}

qrl_status qrl_run_single(const qrl_config* config, const qrl_overrides* overrides, qrl_results** out) {
  return guarded([&] {
    if (!config || !out) throw ArgumentError("qrl_run_single: null argument");
    *out = nullptr;
    runner::RunConfig c = config->config;
    runner::apply_overrides(c, to_overrides(overrides));
    auto r = std::make_unique<qrl_results>();
    r->items.push_back(runner::run_single(c));
    r->finish();
    *out = r.release();
  });
}

qrl_status qrl_run_batch(const char* const* paths, size_t n_paths, int continue_on_error,
                         const qrl_overrides* overrides, qrl_results** out) {
  return guarded([&] {
    if (!out || (n_paths > 0 && !paths)) throw ArgumentError("qrl_run_batch: null argument");
    *out = nullptr;
    std::vector<std::filesystem::path> p;
    for (size_t i = 0; i < n_paths; ++i) {
      if (!paths[i]) throw ArgumentError("qrl_run_batch: null path");
      p.emplace_back(paths[i]);
    }
    runner::BatchOptions opts;
    opts.continue_on_error = continue_on_error != 0;
    opts.overrides = to_overrides(overrides);
    auto r = std::make_unique<qrl_results>();
    r->items = runner::run_batch(p, opts);
    r->finish();
    *out = r.release();
  });
}

qrl_status qrl_tune(const char* grid_path, size_t max_parallel, const qrl_overrides* overrides,
                    qrl_results** out) {
  return guarded([&] {
    if (!grid_path || !out) throw ArgumentError("qrl_tune: null argument");
    *out = nullptr;
    if (max_parallel == 0) throw ArgumentError("max_parallel must be at least 1");
    const auto spec = runner::load_grid(grid_path);
    auto report = runner::tune(spec, max_parallel, to_overrides(overrides));
    auto r = std::make_unique<qrl_results>();
    r->items = std::move(report.ranked);
    for (auto& f : report.failures) r->items.push_back(std::move(f));
    r->summary_path = report.summary_csv.string();
    r->finish();
    *out = r.release();
  });
}

size_t qrl_results_count(const qrl_results* results) { return results ? results->items.size() : 0; }

int qrl_result_ok(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r && r->ok ? 1 : 0;
}

const char* qrl_result_run_name(const qrl_results* results, size_t i) {
  return item(results, i) ? results->names[i].c_str() : "";
}

uint64_t qrl_result_seed(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->config.seed : 0;
}

const char* qrl_result_error(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->error.c_str() : "";
}

double qrl_result_final_return(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->final_return_mean : 0.0;
}

uint64_t qrl_result_env_steps(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->total_env_steps : 0;
}

uint64_t qrl_result_circuit_executions(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->total_circuit_executions : 0;
}

double qrl_result_wall_time(const qrl_results* results, size_t i) {
  const auto* r = item(results, i);
  return r ? r->wall_time_s : 0.0;
}

const char* qrl_result_metrics_path(const qrl_results* results, size_t i) {
  return item(results, i) ? results->metrics[i].c_str() : "";
}

const char* qrl_results_summary_path(const qrl_results* results) {
  return results ? results->summary_path.c_str() : "";
}

void qrl_results_free(qrl_results* results) { delete results; }

qrl_status qrl_report(const char* const* patterns, size_t n_patterns, double threshold,
                      int has_threshold, char** csv_out) {
  return guarded([&] {
    if (!csv_out || (n_patterns > 0 && !patterns)) throw ArgumentError("qrl_report: null argument");
    *csv_out = nullptr;
    std::vector<std::string> pats;
    for (size_t i = 0; i < n_patterns; ++i) {
      if (!patterns[i]) throw ArgumentError("qrl_report: null pattern");
      pats.emplace_back(patterns[i]);
    }
    const std::string csv =
        metrics::report_csv(pats, has_threshold ? std::optional<double>(threshold) : std::nullopt);
    char* buf = static_cast<char*>(std::malloc(csv.size() + 1));
    if (!buf) throw RuntimeError("out of memory");
    std::memcpy(buf, csv.c_str(), csv.size() + 1);
    *csv_out = buf;
  });
}

void qrl_string_free(char* s) { std::free(s); }

}  // extern "C"
