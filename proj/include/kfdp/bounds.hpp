#pragma once

// Simultaneous FDP upper bounds obtained by interpolating k-FWER controlled
// reference sets: single k (JS), joint k (KJI) and the Katsevich-Ramdas
// interpolated bound (KR).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kfdp/calibration.hpp"
#include "kfdp/rational.hpp"
#include "kfdp/stats.hpp"

namespace kfdp {

enum class BoundMethod { js, kji, kr, kct };
std::string method_name(BoundMethod method);

struct BoundReport {
  IndexSet query;
  Fraction fdp_upper;
  int true_discoveries_lower = 0;
  // Index (1-based) of the component that attains the minimum; 0 when the
  // trivial |R| term is the minimum.
  int witness = 0;
  BoundMethod method = BoundMethod::kji;
};

// min{|R|, k - 1 + |R \ S|} / max{1, |R|}
Fraction interpolation_bound(const IndexSet& R, const IndexSet& S, int k);

BoundReport js_bound(const PreparedStats& stats, int k, double alpha, const IndexSet& R);

// Throws PlanMismatch when the plan horizon differs from stats.p().
BoundReport kji_bound(const PreparedStats& stats, const VKPlan& plan, const IndexSet& R);

BoundReport kr_bound(const PreparedStats& stats, double alpha, const IndexSet& R);

// Reusable evaluator for many queries against one dataset and plan.
class KjiEvaluator {
 public:
  KjiEvaluator(const PreparedStats& stats, const VKPlan& plan);
  BoundReport operator()(const IndexSet& R) const;

 private:
  const PreparedStats* stats_;
  std::vector<int> k_;
  std::vector<int> cutoffs_;  // S(v_i) = positives at positions <= cutoffs_[i]
};

class KrEvaluator {
 public:
  KrEvaluator(const PreparedStats& stats, double alpha);
  BoundReport operator()(const IndexSet& R) const;

 private:
  const PreparedStats* stats_;
  std::vector<std::int64_t> slack_;  // floor(c(alpha) (1 + i - |S_i|)), i = 1..p
};

// True discovery function on subsets of an index universe of size n <= 20,
// stored as a table indexed by bitmask.
using DiscoveryTable = std::vector<std::int64_t>;

// max over U of d(U) - |U \ R| + d(R \ U).
std::int64_t general_interpolation(const DiscoveryTable& d, std::uint32_t R);

// d(R) = |R| - numerator of the FDP bound.
inline int true_discoveries(const BoundReport& report) { return report.true_discoveries_lower; }

}  // namespace kfdp
