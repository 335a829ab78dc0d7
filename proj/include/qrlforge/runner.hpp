#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrlforge/agents.hpp"
#include "qrlforge/algorithms.hpp"
#include "qrlforge/envs.hpp"

namespace qrlforge::runner {

// Environment variable consulted when no output directory is given on the
// command line.
inline constexpr const char* kOutputDirEnv = "QRLFORGE_OUTPUT_DIR";

struct RunConfig {
  std::string run_name;
  std::string algorithm;
  std::string agent_kind;
  std::string env_id;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> total_timesteps;
  std::optional<std::uint64_t> total_episodes;
  std::string output_dir = "runs";
  nlohmann::json env_params = nlohmann::json::object();
  nlohmann::json algorithm_params = nlohmann::json::object();
  nlohmann::json agent_params = nlohmann::json::object();

  // Unknown keys, in file order. Not fatal.
  std::vector<std::string> warnings;

  // Parses and fills defaults. Throws ConfigError naming a missing required
  // key or a mistyped one. Does not check compatibility; see validate().
  static RunConfig from_json(const nlohmann::json& j);

  nlohmann::json to_json() const;
  // Stable hex digest of everything except output_dir.
  std::string hash() const;
  // Throws ConfigError if the algorithm, agent and environment cannot run
  // together or a nested parameter is invalid.
  void validate() const;

  std::filesystem::path trial_dir() const;
};

// Throws IoError if the file cannot be read, ConfigError if it does not parse.
RunConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

// Flag beats environment variable beats config file.
void apply_overrides(RunConfig& config, const Overrides& overrides);

// Everything train() and make_agent() need, resolved from a RunConfig.
struct Resolved {
  algorithms::TrainSpec train;
  agents::AgentOptions agent;
  envs::WrapperKind wrapper = envs::WrapperKind::None;
  std::vector<std::string> warnings;
};

Resolved resolve(const RunConfig& config);

// Builds the (possibly wrapped) environment for a config.
std::unique_ptr<envs::Environment> make_env(const RunConfig& config, envs::WrapperKind wrapper);

struct TrialResult {
  RunConfig config;
  bool ok = false;
  std::string error;
  std::string config_hash;
  double final_return_mean = 0.0;
  std::uint64_t episodes = 0;
  std::uint64_t total_env_steps = 0;
  std::uint64_t total_circuit_executions = 0;
  double wall_time_s = 0.0;
  std::filesystem::path metrics_path;
  std::filesystem::path summary_path;
};

// Trains one trial and writes metrics.jsonl, summary.json and params.json
// under output_dir/run_name/seed. Errors propagate as RuntimeError (or the
// original ConfigError) with the trial named in the message.
TrialResult run_single(const RunConfig& config);

struct BatchOptions {
  bool continue_on_error = false;
  Overrides overrides;
};

// All configs are loaded and validated before the first trial starts. Stops
// at the first failing trial unless continue_on_error is set; the failed
// trial is included in the results.
std::vector<TrialResult> run_batch(const std::vector<std::filesystem::path>& paths,
                                   const BatchOptions& options = {});

struct GridSpec {
  nlohmann::json base;  // a RunConfig object
  std::map<std::string, std::vector<nlohmann::json>> grid;  // dotted path -> candidates
  std::uint64_t trials_per_config = 1;
};

GridSpec load_grid(const std::filesystem::path& path);
GridSpec grid_from_json(const nlohmann::json& j);

// Cartesian product with the alphabetically first key outermost, then value
// index, then seed (base seed + 0..k-1). Each point's run name gets a _pNNN
// suffix unless the grid is empty.
std::vector<RunConfig> expand_grid(const GridSpec& spec, const Overrides& overrides = {});

struct TuneReport {
  std::vector<TrialResult> ranked;    // successes, best first
  std::vector<TrialResult> failures;  // in config order
  std::filesystem::path summary_csv;
};

// Runs the expansion on at most max_parallel worker threads. Failing trials
// are recorded without stopping the others.
TuneReport tune(const GridSpec& spec, std::size_t max_parallel, const Overrides& overrides = {});

std::string summary_table_csv(const TuneReport& report);

}  // namespace qrlforge::runner
