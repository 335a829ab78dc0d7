#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrlforge/execution_counter.hpp"

namespace qrlforge::metrics {

// One line of metrics.jsonl, written at the end of every episode.
struct MetricRecord {
  std::uint64_t episode = 0;  // 0-based
  std::uint64_t global_step = 0;
  double episode_return = 0.0;
  std::uint64_t episode_length = 0;
  std::optional<double> loss;
  std::optional<double> epsilon;
  std::uint64_t circuit_executions = 0;
  double wall_time_s = 0.0;
};

nlohmann::json to_json(const MetricRecord& r);
// Throws ArgumentError on missing or mistyped fields.
MetricRecord record_from_json(const nlohmann::json& j);

// Appends records as JSON lines and flushes after each one, so a crashed run
// keeps everything logged so far. Throws MonotonicityError if global_step or
// circuit_executions decrease.
class JsonlSink {
 public:
  explicit JsonlSink(const std::filesystem::path& path);

  void write(const MetricRecord& record);
  const std::filesystem::path& path() const noexcept { return path_; }
  std::size_t records_written() const noexcept { return written_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t written_ = 0;
  std::uint64_t last_step_ = 0;
  std::uint64_t last_exec_ = 0;
};

// Throws IoError naming the file, and the line for malformed content.
std::vector<MetricRecord> read_metrics(const std::filesystem::path& path);

struct RunSummary {
  std::string path;
  std::size_t episodes = 0;
  double final_return_mean = 0.0;  // mean over the last `window` episodes
  std::uint64_t total_env_steps = 0;
  std::uint64_t total_circuit_executions = 0;
  double wall_time_s = 0.0;
  // First episode whose return reaches the threshold.
  std::optional<std::uint64_t> steps_to_threshold;
  std::optional<std::uint64_t> executions_to_threshold;
};

constexpr std::size_t kFinalWindow = 20;

RunSummary summarize(const std::vector<MetricRecord>& records, std::optional<double> threshold,
                     std::size_t window = kFinalWindow);

// Expands shell-style patterns ('*', '?', and '**' spanning directories).
// Patterns without wildcards pass through unchanged. Result is sorted and
// de-duplicated.
std::vector<std::filesystem::path> expand_globs(const std::vector<std::string>& patterns);

// CSV with one row per metrics file.
std::string report_csv(const std::vector<std::string>& patterns, std::optional<double> threshold);

}  // namespace qrlforge::metrics
