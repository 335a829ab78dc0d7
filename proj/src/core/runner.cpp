#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "qrlforge/error.hpp"
#include "qrlforge/runner.hpp"

namespace qrlforge::runner {

namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

nlohmann::json evaluations_json(const std::vector<algorithms::EvalPoint>& evals) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : evals) {
    arr.push_back({{"episode", e.episode}, {"global_step", e.global_step}, {"mean_return", e.mean_return}});
  }
  return arr;
}

TrialResult run_trial(const RunConfig& config) {
  const Resolved r = resolve(config);
  const std::uint64_t s = config.seed;

  auto env = make_env(config, r.wrapper);
  std::unique_ptr<envs::Environment> eval_env;
  if (r.train.eval_interval > 0) eval_env = make_env(config, r.wrapper);

  metrics::ExecutionCounter counter;
  Rng init_rng(derive_seed(s, Stream::AgentInit));
  auto agent = agents::make_agent(r.agent, env->space(), init_rng, derive_seed(s, Stream::Shots), &counter);

  std::size_t occurrences = 0;
  if (auto* q = dynamic_cast<agents::QuantumAgent*>(agent.get())) {
    const std::vector<double> zeros(q->input_dim(), 0.0);
    occurrences = q->parameter_occurrences(zeros);
  }

  const fs::path dir = config.trial_dir();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_json(dir / "config.json", config.to_json());

  algorithms::TrainStreams streams;
  streams.env_seed = derive_seed(s, Stream::Environment);
  streams.exploration_seed = derive_seed(s, Stream::Exploration);
  streams.replay_seed = derive_seed(s, Stream::Replay);
  streams.evaluation_seed = derive_seed(s, Stream::Evaluation);

  metrics::JsonlSink sink(dir / "metrics.jsonl");
  const auto tr = algorithms::train(r.train, *env, *agent, streams, sink, counter, eval_env.get());

  agents::save_parameters(*agent, dir / "params.json");

  TrialResult res;
  res.config = config;
  res.ok = true;
  res.config_hash = config.hash();
  res.final_return_mean = tr.final_return_mean;
  res.episodes = tr.episodes;
  res.total_env_steps = tr.env_steps;
  res.total_circuit_executions = tr.circuit_executions;
  res.wall_time_s = tr.wall_time_s;
  res.metrics_path = sink.path();
  res.summary_path = dir / "summary.json";

  nlohmann::json summary;
  summary["run_name"] = config.run_name;
  summary["seed"] = config.seed;
  summary["config_hash"] = res.config_hash;
  summary["algorithm"] = config.algorithm;
  summary["agent_kind"] = config.agent_kind;
  summary["env_id"] = config.env_id;
  summary["architecture"] = agent->architecture();
  summary["parameter_count"] = agent->parameter_count();
  summary["episodes"] = tr.episodes;
  summary["total_env_steps"] = tr.env_steps;
  summary["updates"] = tr.updates;
  summary["total_circuit_executions"] = tr.circuit_executions;
  summary["final_return_mean"] = tr.final_return_mean;
  summary["wall_time_s"] = tr.wall_time_s;
  summary["stop_reason"] = tr.stop_reason;
  summary["evaluations"] = evaluations_json(tr.evaluations);
  nlohmann::json acc;
  acc["parameter_occurrences"] = occurrences;
  acc["batch_size"] = r.train.dqn.batch_size;
  acc["learning_starts"] = r.train.dqn.learning_starts;
  acc["train_frequency"] = r.train.dqn.train_frequency;
  acc["buffer_size"] = r.train.dqn.buffer_size;
  summary["accounting"] = acc;
  summary["warnings"] = r.warnings;
  write_json(res.summary_path, summary);
  return res;
}

std::string trial_name(const RunConfig& c) {
  return "trial " + c.run_name + " (seed " + std::to_string(c.seed) + ")";
}

}  // namespace

TrialResult run_single(const RunConfig& config) {
  try {
    return run_trial(config);
  } catch (const ConfigError& e) {
    throw ConfigError(trial_name(config) + ": " + e.what());
  } catch (const std::exception& e) {
    throw RuntimeError(trial_name(config) + ": " + e.what());
  }
}

std::vector<TrialResult> run_batch(const std::vector<fs::path>& paths, const BatchOptions& options) {
  std::vector<RunConfig> configs;
  for (const auto& p : paths) {
    RunConfig c = load_config(p);
    apply_overrides(c, options.overrides);
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
    configs.push_back(std::move(c));
  }
  std::vector<TrialResult> results;
  for (const auto& c : configs) {
    try {
      results.push_back(run_single(c));
    } catch (const Error& e) {
      if (!options.continue_on_error) throw;
      TrialResult failed;
      failed.config = c;
      failed.config_hash = c.hash();
      failed.error = e.what();
      results.push_back(std::move(failed));
    }
  }
  return results;
}

// -------------------------------------------------------------------- grid

GridSpec grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("grid file must be a JSON object");
  GridSpec g;
  g.base = j;
  g.base.erase("grid");
  g.base.erase("trials_per_config");
  if (j.contains("trials_per_config")) {
    const auto& v = j.at("trials_per_config");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
      throw ConfigError("\"trials_per_config\" must be a positive integer");
    }
    g.trials_per_config = v.get<std::uint64_t>();
  }
  if (j.contains("grid")) {
    const auto& grid = j.at("grid");
    if (!grid.is_object()) throw ConfigError("\"grid\" must be an object");
    for (const auto& [k, v] : grid.items()) {
      if (!v.is_array()) throw ConfigError("grid axis \"" + k + "\" must be an array");
      if (v.empty()) throw ConfigError("grid axis \"" + k + "\" has no candidate values");
      g.grid[k] = std::vector<nlohmann::json>(v.begin(), v.end());
    }
  }
  RunConfig::from_json(g.base);
  return g;
}

GridSpec load_grid(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read grid " + path.string());
  try {
    return grid_from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

void set_dotted(nlohmann::json& obj, const std::string& path, const nlohmann::json& value) {
  nlohmann::json* cur = &obj;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("malformed grid path \"" + path + "\"");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    if (!cur->contains(key) || (*cur)[key].is_null()) (*cur)[key] = nlohmann::json::object();
    if (!(*cur)[key].is_object()) throw ConfigError("grid path \"" + path + "\" crosses a non-object");
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

std::string point_suffix(std::size_t index) {
  std::ostringstream os;
  os << "_p" << std::setw(3) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

std::vector<RunConfig> expand_grid(const GridSpec& spec, const Overrides& overrides) {
  std::vector<std::pair<std::string, const std::vector<nlohmann::json>*>> axes;
  for (const auto& [k, v] : spec.grid) {
    if (v.empty()) throw ConfigError("grid axis \"" + k + "\" has no candidate values");
    axes.emplace_back(k, &v);
  }
  std::size_t points = 1;
  for (const auto& a : axes) points *= a.second->size();

  std::vector<RunConfig> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t p = 0; p < points; ++p) {
    // Mixed-radix counter with the last axis varying fastest.
    std::size_t rem = p;
    for (std::size_t a = axes.size(); a-- > 0;) {
      idx[a] = rem % axes[a].second->size();
      rem /= axes[a].second->size();
    }
    nlohmann::json j = spec.base;
    for (std::size_t a = 0; a < axes.size(); ++a) set_dotted(j, axes[a].first, (*axes[a].second)[idx[a]]);
    RunConfig point = RunConfig::from_json(j);
    apply_overrides(point, overrides);
    if (!axes.empty()) point.run_name += point_suffix(p);
    const std::uint64_t base_seed = point.seed;
    for (std::uint64_t k = 0; k < spec.trials_per_config; ++k) {
      RunConfig c = point;
      c.seed = base_seed + k;
      out.push_back(std::move(c));
    }
  }
  return out;
}

// -------------------------------------------------------------------- tune

namespace {

// Single-consumer channel the workers report through.
template <class T>
class Channel {
 public:
  void send(T item) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(item));
    }
    cv_.notify_one();
  }
  T receive() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !queue_.empty(); });
    T item = std::move(queue_.front());
    queue_.pop_front();
    return item;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> queue_;
};

}  // namespace

TuneReport tune(const GridSpec& spec, std::size_t max_parallel, const Overrides& overrides) {
  if (max_parallel == 0) throw ArgumentError("max_parallel must be at least 1");
  const std::vector<RunConfig> configs = expand_grid(spec, overrides);
  for (const auto& c : configs) c.validate();

  Channel<std::pair<std::size_t, TrialResult>> channel;
  std::mutex next_mutex;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(next_mutex);
        if (next >= configs.size()) return;
        i = next++;
      }
      TrialResult r;
      try {
        r = run_single(configs[i]);
      } catch (const std::exception& e) {
        r.config = configs[i];
        r.config_hash = configs[i].hash();
        r.error = e.what();
      }
      channel.send({i, std::move(r)});
    }
  };

  const std::size_t n_workers = std::min(max_parallel, std::max<std::size_t>(configs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  std::vector<std::pair<std::size_t, TrialResult>> done;
  for (std::size_t k = 0; k < configs.size(); ++k) done.push_back(channel.receive());
  for (auto& t : pool) t.join();

  std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<std::size_t, TrialResult>> ok;
  TuneReport report;
  for (auto& d : done) {
    if (d.second.ok) {
      ok.push_back(std::move(d));
    } else {
      report.failures.push_back(std::move(d.second));
    }
  }
  std::stable_sort(ok.begin(), ok.end(), [](const auto& a, const auto& b) {
    if (a.second.final_return_mean != b.second.final_return_mean) {
      return a.second.final_return_mean > b.second.final_return_mean;
    }
    if (a.second.total_circuit_executions != b.second.total_circuit_executions) {
      return a.second.total_circuit_executions < b.second.total_circuit_executions;
    }
    return a.first < b.first;
  });
  for (auto& d : ok) report.ranked.push_back(std::move(d.second));

  if (!configs.empty()) {
    RunConfig base = RunConfig::from_json(spec.base);
    apply_overrides(base, overrides);
    const fs::path dir = fs::path(base.output_dir) / base.run_name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    report.summary_csv = dir / "tune_summary.csv";
    std::ofstream f(report.summary_csv);
    if (!f) throw IoError("cannot write " + report.summary_csv.string());
    f << summary_table_csv(report);
  }
  return report;
}

std::string summary_table_csv(const TuneReport& report) {
  std::ostringstream os;
  os << "rank,run_name,config_hash,final_return_mean,total_env_steps,total_circuit_executions,"
        "wall_time_s,metrics_path\n";
  os << std::setprecision(10);
  std::size_t rank = 1;
  for (const auto& r : report.ranked) {
    os << rank++ << ',' << r.config.run_name << "/" << r.config.seed << ',' << r.config_hash << ','
       << r.final_return_mean << ',' << r.total_env_steps << ',' << r.total_circuit_executions << ','
       << r.wall_time_s << ',' << r.metrics_path.string() << '\n';
  }
  for (const auto& r : report.failures) {
    os << "failed," << r.config.run_name << "/" << r.config.seed << ',' << r.config_hash << ",,,,,\n";
  }
  return os.str();
}

}  // namespace qrlforge::runner
