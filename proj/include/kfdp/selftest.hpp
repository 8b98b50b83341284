#pragma once

// Oracle-equality suite on small instances (p <= 12): every closed-form or
// shortcut bound is compared with its exhaustive counterpart on all subsets.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace kfdp {

struct SelftestCheck {
  std::string name;
  long cases = 0;
  long mismatches = 0;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  bool ok() const;
};

SelftestReport run_selftest(int p = 10, int draws = 5, std::uint64_t seed = 1, std::ostream* log = nullptr);

}  // namespace kfdp
