#pragma once

#include <cstdint>

namespace qrlforge::metrics {

// Cumulative number of circuit executions for one trial. One statevector run
// is one execution, regardless of how many observables are read from it.
class ExecutionCounter {
 public:
  void add(std::uint64_t n) noexcept { count_ += n; }
  std::uint64_t count() const noexcept { return count_; }

 private:
  std::uint64_t count_ = 0;
};

}  // namespace qrlforge::metrics
