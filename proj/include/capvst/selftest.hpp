#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace capvst {

// Runs a compact version of every invariant suite and returns
//   {"passed": bool, "parameter_count": n, "checks": [{name, passed, value, bound}]}.
nlohmann::json run_selftest(std::uint64_t seed = 0);

struct BenchOptions {
  int side = 512;  // features are C x side x side
  int reps = 20;
  std::uint64_t seed = 0;
};

// Median wall time of cWCT transfer and the eigendecomposition baseline at
// C = 32 and C = 256. "passed" holds the C = 256 ordering.
nlohmann::json run_bench(const BenchOptions& opts = {});

}  // namespace capvst
