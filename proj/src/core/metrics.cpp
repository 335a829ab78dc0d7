#include "qrlforge/metrics.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "qrlforge/error.hpp"

namespace qrlforge::metrics {

namespace fs = std::filesystem;

nlohmann::json to_json(const MetricRecord& r) {
  nlohmann::json j;
  j["episode"] = r.episode;
  j["global_step"] = r.global_step;
  j["return"] = r.episode_return;
  j["length"] = r.episode_length;
  j["loss"] = r.loss ? nlohmann::json(*r.loss) : nlohmann::json(nullptr);
  j["epsilon"] = r.epsilon ? nlohmann::json(*r.epsilon) : nlohmann::json(nullptr);
  j["circuit_executions"] = r.circuit_executions;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

namespace {

std::uint64_t get_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ArgumentError(std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_real(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ArgumentError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_real(j, key);
}

}  // namespace

MetricRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("metric record must be a JSON object");
  MetricRecord r;
  r.episode = get_count(j, "episode");
  r.global_step = get_count(j, "global_step");
  r.episode_return = get_real(j, "return");
  r.episode_length = get_count(j, "length");
  r.loss = get_optional(j, "loss");
  r.epsilon = get_optional(j, "epsilon");
  r.circuit_executions = get_count(j, "circuit_executions");
  r.wall_time_s = get_real(j, "wall_time_s");
  return r;
}

JsonlSink::JsonlSink(const fs::path& path) : path_(path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw IoError("cannot open metrics file " + path.string());
}

void JsonlSink::write(const MetricRecord& record) {
  if (written_ > 0) {
    if (record.global_step < last_step_) {
      throw MonotonicityError(path_.string() + ": global_step went from " + std::to_string(last_step_) +
                              " to " + std::to_string(record.global_step));
    }
    if (record.circuit_executions < last_exec_) {
      throw MonotonicityError(path_.string() + ": circuit_executions went from " +
                              std::to_string(last_exec_) + " to " +
                              std::to_string(record.circuit_executions));
    }
  }
  out_ << to_json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing metrics file " + path_.string());
  last_step_ = record.global_step;
  last_exec_ = record.circuit_executions;
  ++written_;
}

std::vector<MetricRecord> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics file " + path.string());
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return out;
}

RunSummary summarize(const std::vector<MetricRecord>& records, std::optional<double> threshold,
                     std::size_t window) {
  RunSummary s;
  s.episodes = records.size();
  if (records.empty()) return s;
  const std::size_t n = std::min(window, records.size());
  double sum = 0.0;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) sum += records[i].episode_return;
  s.final_return_mean = sum / static_cast<double>(n);
  s.total_env_steps = records.back().global_step;
  s.total_circuit_executions = records.back().circuit_executions;
  s.wall_time_s = records.back().wall_time_s;
  if (threshold) {
    for (const auto& r : records) {
      if (r.episode_return >= *threshold) {
        s.steps_to_threshold = r.global_step;
        s.executions_to_threshold = r.circuit_executions;
        break;
      }
    }
  }
  return s;
}

// ------------------------------------------------------------------- globs

namespace {

bool has_wildcard(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

std::vector<std::string> split_segments(const fs::path& p) {
  std::vector<std::string> out;
  for (const auto& part : p) {
    if (!part.empty()) out.push_back(part.string());
  }
  return out;
}

bool match_segments(const std::vector<std::string>& pat, std::size_t pi,
                    const std::vector<std::string>& name, std::size_t ni) {
  if (pi == pat.size()) return ni == name.size();
  if (pat[pi] == "**") {
    for (std::size_t k = ni; k <= name.size(); ++k) {
      if (match_segments(pat, pi + 1, name, k)) return true;
    }
    return false;
  }
  if (ni == name.size()) return false;
  if (fnmatch(pat[pi].c_str(), name[ni].c_str(), FNM_PERIOD) != 0) return false;
  return match_segments(pat, pi + 1, name, ni + 1);
}

}  // namespace

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
  std::set<fs::path> found;
  for (const auto& pattern : patterns) {
    if (!has_wildcard(pattern)) {
      found.insert(fs::path(pattern));
      continue;
    }
    // Longest wildcard-free directory prefix is the walk root.
    const fs::path p(pattern);
    fs::path root;
    std::vector<std::string> rest;
    bool wild = false;
    for (const auto& part : p) {
      if (!wild && !has_wildcard(part.string())) {
        root /= part;
      } else {
        wild = true;
        if (!part.empty()) rest.push_back(part.string());
      }
    }
    const fs::path walk_root = root.empty() ? fs::path(".") : root;
    std::error_code ec;
    if (!fs::is_directory(walk_root, ec)) continue;
    for (auto it = fs::recursive_directory_iterator(walk_root, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
      if (!it->is_regular_file(ec)) continue;
      const fs::path rel = it->path().lexically_relative(walk_root);
      if (match_segments(rest, 0, split_segments(rel), 0)) {
        found.insert(root.empty() ? rel : root / rel);
      }
    }
  }
  return {found.begin(), found.end()};
}

std::string report_csv(const std::vector<std::string>& patterns, std::optional<double> threshold) {
  const auto paths = expand_globs(patterns);
  std::ostringstream os;
  os << "metrics_path,episodes,final_return_mean,steps_to_threshold,executions_to_threshold,"
        "total_env_steps,total_circuit_executions,wall_time_s\n";
  os << std::setprecision(10);
  for (const auto& path : paths) {
    const RunSummary s = summarize(read_metrics(path), threshold);
    os << path.string() << ',' << s.episodes << ',' << s.final_return_mean << ',';
    if (s.steps_to_threshold) os << *s.steps_to_threshold;
    os << ',';
    if (s.executions_to_threshold) os << *s.executions_to_threshold;
    os << ',' << s.total_env_steps << ',' << s.total_circuit_executions << ',' << s.wall_time_s
       << '\n';
  }
  return os.str();
}

}  // namespace qrlforge::metrics
