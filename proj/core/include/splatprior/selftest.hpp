#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splatprior {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick randomized property checks across all modules.
std::vector<SelftestResult> run_selftest(std::uint64_t seed = 0);

}  // namespace splatprior
