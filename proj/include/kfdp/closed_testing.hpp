#pragma once

// Closed testing with multi-weighted-sum local tests on knockoff signs.
//
// A local test for an intersection H_I computes, for each component i,
//   L_i = sum_{j in I, W_j > 0} w(i, r_j, |I|)
// where r_j is the local rank of |W_j| inside I (smallest |W| has rank 1), and
// rejects when some L_i >= z_i. Budgets b_i and critical values z_i may depend
// on I only through |I|. The closed testing bound t(R) is the size of the
// largest subset of R that closed testing does not reject.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kfdp/calibration.hpp"
#include "kfdp/rational.hpp"
#include "kfdp/sign_pool.hpp"
#include "kfdp/stats.hpp"

namespace kfdp {

enum class WeightFamily { indicator, rank, custom };

std::string weight_family_name(WeightFamily family);
WeightFamily parse_weight_family(const std::string& name);

// Integer weight of a positive member for component i (1-based) given its local
// rank, the intersection size and the component budget.
using WeightRule = std::function<std::int64_t(int component, int local_rank, int size, int budget)>;

struct SizeRule {
  std::vector<int> budgets;
  std::vector<std::int64_t> critical;
  // Pool estimate of P(L_i <= z_i - 1 for all i) under fair signs, when calibrated.
  std::optional<double> certificate;

  int components() const { return static_cast<int>(budgets.size()); }
};

class LocalTestSpec {
 public:
  using RuleProvider = std::function<SizeRule(int size)>;

  LocalTestSpec(WeightFamily family, RuleProvider provider, std::string label, WeightRule custom = {});

  WeightFamily family() const;
  const std::string& label() const;

  // Rule for intersections of the given size, computed once and cached.
  const SizeRule& rule(int size) const;
  void warm(int max_size) const;

  std::int64_t weight(int component, int local_rank, int size, int budget) const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

struct CriticalValues {
  std::vector<std::int64_t> z;
  double certificate = 0.0;
};

// Critical values for intersections of size s under s fair signs: start from
// Bonferroni marginal quantiles (each at level alpha/m), then lower z_1..z_m in
// turn while the joint acceptance frequency on the pool stays >= 1 - alpha.
CriticalValues calibrate_critical_values(int size, WeightFamily family, const std::vector<int>& budgets,
                                         double alpha, const SignPathPool& pool, const WeightRule& custom = {});

// L_i for the intersection I, straight from the definition. Component is 1-based.
std::int64_t local_stat(const IndexSet& I, const PreparedStats& stats, const LocalTestSpec& spec, int component);
bool locally_rejected(const IndexSet& I, const PreparedStats& stats, const LocalTestSpec& spec);

// pi(i) = rank of W_i in ascending signed order; returned as pi[pos - 1].
std::vector<int> pi_permutation(const PreparedStats& stats);

struct CTOutcome {
  IndexSet query;
  int t_bound = 0;
  Fraction fdp_upper;
  // Accepting (t, r) pair of the shortcut; witness_t = 0 and witness_r = -1
  // when nothing is accepted (or when produced by the oracle).
  int witness_t = 0;
  int witness_r = -1;
};

// Same b, z for every size: b_i = k_i + v_i - 1, z_i = k_i.
LocalTestSpec translate_plan(const VKPlan& plan);
// m = |I| components with b_i = k_raw_i + i - 1, z_i = k_raw_i.
LocalTestSpec kr_spec(double alpha);

// Uniformly improved (indicator) or rank-weighted local test with per-size k
// from the two-step calibration at horizon |I|. Components with v_i <= |I|
// are kept, together with the first v_i > |I| (all larger ones coincide).
// The per-size k never exceeds the horizon-p plan, so the test is at least as
// powerful as the translated KJI plan at every size.
class KctCalibration {
 public:
  KctCalibration(std::vector<int> v, double alpha, double delta, int p, std::shared_ptr<const SignPathPool> pool);

  const VKPlan& base_plan() const { return base_plan_; }
  const std::vector<int>& v() const { return v_; }
  double alpha() const { return alpha_; }
  int p() const { return p_; }

  struct SizePlan {
    std::vector<int> v;
    std::vector<int> k;
    double certificate = 0.0;
    bool from_base = false;  // two-step output exceeded the base plan somewhere
  };
  const SizePlan& at(int size) const;

  LocalTestSpec spec(WeightFamily family) const;

 private:
  struct Cache;
  std::vector<int> v_;
  double alpha_;
  double delta_;
  int p_;
  std::shared_ptr<const SignPathPool> pool_;
  VKPlan base_plan_;
  std::shared_ptr<Cache> cache_;
};

class ShortcutEvaluator {
 public:
  ShortcutEvaluator(const PreparedStats& stats, LocalTestSpec spec);
  CTOutcome operator()(const IndexSet& R) const;

  // Local acceptance of a membership mask (positions 1..p at index pos - 1).
  bool accepts(const std::vector<char>& member, int size) const;

 private:
  const PreparedStats* stats_;
  LocalTestSpec spec_;
  std::vector<int> pi_;     // pi[pos - 1]
  std::vector<int> by_pi_;  // positions in increasing pi
  std::vector<const SizeRule*> rules_;
};

CTOutcome shortcut_bound(const IndexSet& R, const PreparedStats& stats, const LocalTestSpec& spec);

// Exhaustive closed testing; all 2^p intersections are tested once.
class BruteForceClosedTesting {
 public:
  static constexpr int max_p = 14;
  BruteForceClosedTesting(const PreparedStats& stats, const LocalTestSpec& spec);
  CTOutcome operator()(const IndexSet& R) const;
  bool locally_rejected(std::uint32_t mask) const { return rejected_[mask]; }

 private:
  int p_;
  std::vector<char> rejected_;
  std::vector<int> largest_open_subset_;
};

CTOutcome brute_force_ct(const IndexSet& R, const PreparedStats& stats, const LocalTestSpec& spec);

CTOutcome kct_bound(const IndexSet& R, const PreparedStats& stats, const KctCalibration& calibration,
                    WeightFamily family = WeightFamily::indicator);

}  // namespace kfdp
