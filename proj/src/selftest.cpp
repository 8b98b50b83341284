#include "kfdp/selftest.hpp"

#include <memory>
#include <random>

#include "kfdp/bounds.hpp"
#include "kfdp/closed_testing.hpp"
#include "kfdp/error.hpp"

namespace kfdp {

bool SelftestReport::ok() const {
  for (const auto& c : checks) {
    if (c.mismatches != 0) return false;
  }
  return true;
}

SelftestReport run_selftest(int p, int draws, std::uint64_t seed, std::ostream* log) {
  if (p < 2 || p > 12) throw Error(ErrorCode::invalid_input, "selftest needs 2 <= p <= 12");
  SelftestReport report;
  report.checks = {{"kr = kji(k_raw)"}, {"shortcut(kji) = kji"}, {"shortcut(kr) = kr"},
                   {"shortcut = brute force (kji)"}, {"shortcut = brute force (kct rank)"},
                   {"shortcut = brute force (kct indicator)"}};
  const double alpha = 0.05;
  auto pool = std::make_shared<SignPathPool>(20000, p, seed);
  std::vector<int> all_v(p);
  for (int i = 0; i < p; ++i) all_v[i] = i + 1;

  VKPlan raw_plan;
  raw_plan.v = all_v;
  raw_plan.k = k_raw(all_v, alpha);
  raw_plan.alpha = alpha;
  raw_plan.horizon_p = p;
  const VKPlan plan = two_step_k(v_family({VKind::B, p + 1, {}}), alpha, 0.01, p, *pool);

  KctCalibration kct(all_v, alpha, 0.01, p, pool);
  const LocalTestSpec translated = translate_plan(plan);
  const LocalTestSpec kr = kr_spec(alpha);
  const LocalTestSpec kct_indicator = kct.spec(WeightFamily::indicator);
  const LocalTestSpec kct_rank = kct.spec(WeightFamily::rank);

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int draw = 0; draw < draws; ++draw) {
    std::vector<StatEntry> entries;
    for (int i = 0; i < p; ++i) entries.push_back({"v" + std::to_string(i + 1), noise(gen) + 1.0});
    const PreparedStats stats = prepare(RawStats(entries));
    const KrEvaluator kr_eval(stats, alpha);
    const KjiEvaluator raw_eval(stats, raw_plan);
    const KjiEvaluator kji_eval(stats, plan);
    const ShortcutEvaluator sc_kji(stats, translated);
    const ShortcutEvaluator sc_kr(stats, kr);
    const ShortcutEvaluator sc_ind(stats, kct_indicator);
    const ShortcutEvaluator sc_rank(stats, kct_rank);
    const BruteForceClosedTesting bf_kji(stats, translated);
    const BruteForceClosedTesting bf_ind(stats, kct_indicator);
    const BruteForceClosedTesting bf_rank(stats, kct_rank);

    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      std::vector<int> members;
      for (int b = 0; b < p; ++b) {
        if (mask >> b & 1u) members.push_back(b + 1);
      }
      const IndexSet R = IndexSet::from_sorted(std::move(members));
      const bool results[] = {
          kr_eval(R).fdp_upper == raw_eval(R).fdp_upper,
          sc_kji(R).fdp_upper == kji_eval(R).fdp_upper,
          sc_kr(R).fdp_upper == kr_eval(R).fdp_upper,
          sc_kji(R).t_bound == bf_kji(R).t_bound,
          sc_rank(R).t_bound == bf_rank(R).t_bound,
          sc_ind(R).t_bound == bf_ind(R).t_bound,
      };
      for (std::size_t c = 0; c < report.checks.size(); ++c) {
        ++report.checks[c].cases;
        report.checks[c].mismatches += !results[c];
      }
    }
  }
  if (log) {
    for (const auto& c : report.checks) {
      *log << (c.mismatches == 0 ? "ok   " : "FAIL ") << c.name << ": " << c.mismatches << " mismatches in "
           << c.cases << " queries\n";
    }
  }
  return report;
}

}  // namespace kfdp
