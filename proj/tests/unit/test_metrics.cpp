#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qrlforge/error.hpp"
#include "qrlforge/metrics.hpp"
#include "qrlforge/rng.hpp"

using namespace qrlforge;
using namespace qrlforge::metrics;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "qrlforge_test_metrics" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

MetricRecord rec(std::uint64_t ep, std::uint64_t step, double ret, std::uint64_t len, std::uint64_t exec = 0) {
  MetricRecord r;
  r.episode = ep;
  r.global_step = step;
  r.episode_return = ret;
  r.episode_length = len;
  r.circuit_executions = exec;
  return r;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("jsonl sink writes one parseable line per record") {
  const auto path = fresh_dir("five") / "metrics.jsonl";
  {
    JsonlSink sink(path);
    for (std::uint64_t i = 0; i < 5; ++i) sink.write(rec(i, 10 * (i + 1), 1.0 * i, 10));
    CHECK(sink.records_written() == 5);
  }
  const auto lines = lines_of(path);
  REQUIRE(lines.size() == 5);
  for (const auto& l : lines) {
    const auto j = nlohmann::json::parse(l);
    for (const char* key :
         {"episode", "global_step", "return", "length", "loss", "epsilon", "circuit_executions", "wall_time_s"}) {
      CHECK(j.contains(key));
    }
    CHECK(j.at("loss").is_null());
    CHECK(j.at("epsilon").is_null());
  }
}

TEST_CASE("empty trial leaves an empty file") {
  const auto path = fresh_dir("empty") / "metrics.jsonl";
  { JsonlSink sink(path); }
  CHECK(fs::exists(path));
  CHECK(fs::file_size(path) == 0);
  CHECK(read_metrics(path).empty());
}

TEST_CASE("monotonicity is enforced") {
  const auto dir = fresh_dir("mono");
  JsonlSink sink(dir / "a.jsonl");
  sink.write(rec(0, 20, 0, 20, 5));
  CHECK_THROWS_AS(sink.write(rec(1, 19, 0, 1, 5)), MonotonicityError);
  JsonlSink sink2(dir / "b.jsonl");
  sink2.write(rec(0, 20, 0, 20, 5));
  CHECK_THROWS_AS(sink2.write(rec(1, 25, 0, 5, 4)), MonotonicityError);
  sink2.write(rec(1, 20, 0, 0, 5));
}

TEST_CASE("records round-trip") {
  const auto path = fresh_dir("roundtrip") / "metrics.jsonl";
  Rng rng(11);
  std::vector<MetricRecord> written;
  {
    JsonlSink sink(path);
    std::uint64_t step = 0, exec = 0;
    for (std::uint64_t i = 0; i < 50; ++i) {
      step += rng.below(100);
      exec += rng.below(1000);
      auto r = rec(i, step, rng.normal() * 100, rng.below(500), exec);
      if (i % 2) r.loss = rng.uniform(0, 3);
      if (i % 3) r.epsilon = rng.uniform(0, 1);
      r.wall_time_s = rng.uniform(0, 60);
      sink.write(r);
      written.push_back(r);
    }
  }
  const auto back = read_metrics(path);
  REQUIRE(back.size() == written.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].episode == written[i].episode);
    CHECK(back[i].global_step == written[i].global_step);
    CHECK(back[i].episode_return == written[i].episode_return);
    CHECK(back[i].episode_length == written[i].episode_length);
    CHECK(back[i].loss == written[i].loss);
    CHECK(back[i].epsilon == written[i].epsilon);
    CHECK(back[i].circuit_executions == written[i].circuit_executions);
    CHECK(back[i].wall_time_s == written[i].wall_time_s);
  }
}

TEST_CASE("malformed lines name the file and line") {
  const auto path = fresh_dir("bad") / "metrics.jsonl";
  {
    std::ofstream f(path);
    f << nlohmann::json(to_json(rec(0, 1, 0, 1))).dump() << "\n{not json\n";
  }
  try {
    read_metrics(path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(path.string()) != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(read_metrics(path.parent_path() / "missing.jsonl"), IoError);
  CHECK_THROWS_AS(record_from_json(nlohmann::json{{"episode", 0}}), ArgumentError);
}

TEST_CASE("summarize") {
  SUBCASE("all returns 1.0") {
    std::vector<MetricRecord> rs;
    for (std::uint64_t i = 0; i < 30; ++i) rs.push_back(rec(i, 7 * (i + 1), 1.0, 7));
    const auto s = summarize(rs, 1.0);
    CHECK(s.final_return_mean == 1.0);
    CHECK(s.steps_to_threshold == 7u);
    CHECK(s.executions_to_threshold == 0u);
    CHECK(s.total_env_steps == 210);
    CHECK(s.total_circuit_executions == 0);
    CHECK(s.episodes == 30);
  }
  SUBCASE("threshold never reached") {
    std::vector<MetricRecord> rs{rec(0, 5, 1.0, 5, 10), rec(1, 9, 2.0, 4, 30)};
    const auto s = summarize(rs, 3.0);
    CHECK_FALSE(s.steps_to_threshold.has_value());
    CHECK_FALSE(s.executions_to_threshold.has_value());
    CHECK(s.final_return_mean == doctest::Approx(1.5));
  }
  SUBCASE("threshold crossing carries executions at that point") {
    std::vector<MetricRecord> rs{rec(0, 5, 1.0, 5, 10), rec(1, 9, 4.0, 4, 30), rec(2, 12, 5.0, 3, 70)};
    const auto s = summarize(rs, 3.0);
    CHECK(s.steps_to_threshold == 9u);
    CHECK(s.executions_to_threshold == 30u);
    CHECK(s.total_circuit_executions == 70);
  }
  SUBCASE("final window is the last twenty") {
    std::vector<MetricRecord> rs;
    for (std::uint64_t i = 0; i < 40; ++i) rs.push_back(rec(i, i + 1, i < 20 ? 0.0 : 2.0, 1));
    CHECK(summarize(rs, std::nullopt).final_return_mean == 2.0);
  }
  SUBCASE("empty") {
    const auto s = summarize({}, 1.0);
    CHECK(s.episodes == 0);
    CHECK(s.final_return_mean == 0.0);
  }
}

TEST_CASE("globs and csv report") {
  const auto dir = fresh_dir("report");
  fs::create_directories(dir / "a" / "1");
  fs::create_directories(dir / "b" / "deep" / "2");
  for (const auto& p : {dir / "a" / "1" / "metrics.jsonl", dir / "b" / "deep" / "2" / "metrics.jsonl"}) {
    JsonlSink sink(p);
    sink.write(rec(0, 10, 200.0, 10));
  }
  const auto found = expand_globs({(dir / "**" / "*.jsonl").string()});
  CHECK(found.size() == 2);
  CHECK(std::is_sorted(found.begin(), found.end()));
  CHECK(expand_globs({(dir / "a" / "?" / "*.jsonl").string()}).size() == 1);
  CHECK(expand_globs({(dir / "*" / "*.jsonl").string()}).empty());

  const auto csv = report_csv({(dir / "**" / "*.jsonl").string()}, 195.0);
  std::istringstream in(csv);
  std::vector<std::string> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].find("200") != std::string::npos);
}

TEST_CASE("execution counter only increases") {
  ExecutionCounter c;
  CHECK(c.count() == 0);
  c.add(3);
  c.add(0);
  c.add(4);
  CHECK(c.count() == 7);
}
