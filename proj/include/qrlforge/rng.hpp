#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qrlforge {

// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-stream identifiers. A trial seed s yields stream k's seed as
// splitmix64(splitmix64(s) ^ (k * 0xD1B54A32D192ED03)).
enum class Stream : std::uint64_t {
  Environment = 1,
  AgentInit = 2,
  Exploration = 3,
  Replay = 4,
  Shots = 5,
  Evaluation = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t trial_seed, Stream stream) noexcept {
  return splitmix64(splitmix64(trial_seed) ^
                    (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL));
}

// Thin wrapper over mt19937_64. The distributions are hand-rolled so that a
// given seed produces the same stream with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  void seed(std::uint64_t s) { engine_.seed(s); }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qrlforge
