// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here, not taken from the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kfdp/bounds.hpp"
#include "kfdp/calibration.hpp"
#include "kfdp/closed_testing.hpp"
#include "kfdp/simulation.hpp"
#include "oracles.hpp"

using namespace kfdp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

IndexSet from_mask(std::uint32_t mask, int p) { return IndexSet::from_sorted(oracle::members_of(mask, p)); }

IndexSet range_set(int lo, int hi) {
  std::vector<int> members;
  for (int i = lo; i <= hi; ++i) members.push_back(i);
  return IndexSet(members);
}

std::vector<int> one_to(int p) {
  std::vector<int> v(p);
  for (int i = 0; i < p; ++i) v[i] = i + 1;
  return v;
}

// The plan whose KJI bound is the KR bound: v = 1..p with k = k_raw(v).
VKPlan raw_full_plan(int p, double alpha) {
  VKPlan plan;
  plan.v = one_to(p);
  plan.k = k_raw(plan.v, alpha);
  plan.alpha = alpha;
  plan.horizon_p = p;
  return plan;
}

PreparedStats random_stats(int p, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> plus(0.3, 0.9);
  return prepare(RawStats(oracle::random_w(p, gen, plus(gen))));
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// p=1000, v<150: joint probability at k_raw and after both refinement steps.
Outcome joint_probabilities() {
  const int p = 1000;
  const long nsim = 100000;
  const double tol = 0.005;
  const auto t0 = std::chrono::steady_clock::now();
  const SignPathPool pool(nsim, p, 2024);
  bool pass = true;
  std::string detail;
  for (auto kind : {VKind::A, VKind::B, VKind::C, VKind::D}) {
    const auto start = std::chrono::steady_clock::now();
    const auto v = v_family({kind, 150, {}});
    const auto trace = two_step_trace(v, 0.05, 0.01, p, pool);
    // The first family also pays for the pool.
    const auto from = kind == VKind::A ? t0 : start;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
    const bool ok = std::abs(trace.prob_raw - 0.963) <= tol && std::abs(trace.prob_step2 - 0.950) <= tol && secs < 60.0;
    pass = pass && ok;
    detail += fmt("%s raw=%.4f step2=%.4f (%.1fs); ", vkind_name(kind).c_str(), trace.prob_raw, trace.prob_step2, secs);
  }
  detail += fmt("targets 0.963/0.950 +- %.3f, < 60 s per family", tol);
  return {pass, detail};
}

// KR equals KJI with v = 1..p and k = k_raw.
Outcome kr_is_kji() {
  std::mt19937_64 gen(101);
  long cases = 0, mismatches = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const int p = 12;
    const auto stats = random_stats(p, gen);
    const KrEvaluator kr(stats, 0.05);
    const KjiEvaluator kji(stats, raw_full_plan(p, 0.05));
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask, ++cases) {
      const auto R = from_mask(mask, p);
      mismatches += kr(R).fdp_upper != kji(R).fdp_upper;
    }
  }
  for (int draw = 0; draw < 50; ++draw) {
    const int p = 200;
    const auto stats = random_stats(p, gen);
    const KrEvaluator kr(stats, 0.05);
    const KjiEvaluator kji(stats, raw_full_plan(p, 0.05));
    for (const auto& R : nested_sets(stats)) {
      ++cases;
      mismatches += kr(R).fdp_upper != kji(R).fdp_upper;
    }
  }
  return {mismatches == 0, fmt("%ld mismatches in %ld queries (p=12 all subsets x20, p=200 nested x50)", mismatches, cases)};
}

// Shortcut with translated specs equals KJI and KR.
Outcome shortcut_is_kji_kr() {
  std::mt19937_64 gen(202);
  long cases = 0, mismatches = 0;
  const auto kr = kr_spec(0.05);
  auto run = [&](const PreparedStats& stats, const VKPlan& plan, const std::vector<IndexSet>& queries) {
    const ShortcutEvaluator via_plan(stats, translate_plan(plan)), via_kr(stats, kr);
    const KjiEvaluator kji(stats, plan);
    const KrEvaluator krb(stats, 0.05);
    for (const auto& R : queries) {
      cases += 2;
      mismatches += via_plan(R).fdp_upper != kji(R).fdp_upper;
      mismatches += via_kr(R).fdp_upper != krb(R).fdp_upper;
    }
  };
  {
    const int p = 12;
    const SignPathPool pool(100000, p, 5);
    const auto calibrated = two_step_k(v_family({VKind::B, p, {}}), 0.05, 0.01, p, pool);
    std::vector<IndexSet> all;
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) all.push_back(from_mask(mask, p));
    for (int draw = 0; draw < 20; ++draw) {
      const auto stats = random_stats(p, gen);
      run(stats, draw % 2 ? calibrated : raw_full_plan(p, 0.05), all);
    }
  }
  {
    const int p = 200;
    const SignPathPool pool(100000, p, 6);
    const auto calibrated = two_step_k(v_family({VKind::B, p, {}}), 0.05, 0.01, p, pool);
    for (int draw = 0; draw < 50; ++draw) {
      const auto stats = random_stats(p, gen);
      run(stats, calibrated, nested_sets(stats));
    }
  }
  return {mismatches == 0, fmt("%ld mismatches in %ld comparisons (same grid as criterion 2)", mismatches, cases)};
}

// Shortcut equals brute-force closed testing.
Outcome shortcut_is_brute_force() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(303);
  const int p = 12;
  auto pool = std::make_shared<SignPathPool>(100000, p, 8);
  const KctCalibration kct(v_family({VKind::B, p, {}}), 0.05, 0.01, p, pool);
  const std::vector<LocalTestSpec> specs{translate_plan(kct.base_plan()), kct.spec(WeightFamily::indicator),
                                         kct.spec(WeightFamily::rank)};
  long cases = 0, mismatches = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto stats = random_stats(p, gen);
    for (const auto& spec : specs) {
      const BruteForceClosedTesting bf(stats, spec);
      const ShortcutEvaluator sc(stats, spec);
      for (std::uint32_t mask = 0; mask < (1u << p); ++mask, ++cases) {
        const auto R = from_mask(mask, p);
        mismatches += sc(R).t_bound != bf(R).t_bound;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < 600.0,
          fmt("%ld mismatches in %ld queries (translated, KCT indicator, KCT rank; p=12 x20) in %.1fs (< 600 s)",
              mismatches, cases, secs)};
}

// N^p(v) >= k iff B^p(k+v-1) >= k, and the complementary event, at p = 16.
Outcome event_identities() {
  const int p = 16;
  long checks = 0, counterexamples = 0;
  std::vector<int> path(p);
  for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
    for (int s = 0; s < p; ++s) path[s] = (mask >> s & 1u) ? 1 : -1;
    for (int v = 1; v <= p; ++v) {
      const int n = oracle::early_stopped(path, p, v);
      for (int k = 1; k <= p; ++k) {
        const int b = oracle::plus_in_prefix(path, p, k + v - 1);
        counterexamples += (n >= k) != (b >= k);
        counterexamples += (n <= k - 1) != (b <= k - 1);
        checks += 2;
      }
    }
  }
  return {counterexamples == 0, fmt("%ld counterexamples in %ld checks (all 2^16 sequences, 1 <= v,k <= 16)",
                                    counterexamples, checks)};
}

// Simultaneous coverage over nested and random sets.
Outcome coverage() {
  const int p = 50;
  const long reps = 400;
  const double limit = 0.05 + 3 * std::sqrt(0.05 * 0.95 / reps);
  MethodOptions options;
  const auto methods = make_methods({"js-10", "kji-a", "kji-b", "kji-c", "kji-d", "kr", "kct-b", "kct-rank-b"}, p, options);
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<std::string, Generator>> settings{
      {"direct", direct_w_generator(p, range_set(10, 20))}, {"global-null", direct_w_generator(p, range_set(1, p))}};
  for (const auto& [name, generator] : settings) {
    const auto result = coverage_experiment(generator, methods, reps, 0.05, nested_plus_random(100), 7);
    double worst = 0.0;
    std::string worst_method;
    for (const auto& row : result.rows) {
      if (row.rate >= worst) worst = row.rate, worst_method = row.method;
      pass = pass && row.rate <= limit;
    }
    detail += fmt("%s worst %s=%.4f; ", name.c_str(), worst_method.c_str(), worst);
  }
  detail += fmt("limit %.4f over %ld reps", limit, reps);
  return {pass, detail};
}

// (i) KJI(v = 1..p, refined k) <= KR; (ii) KCT <= KJI; (iii) strict gaps.
Outcome dominance() {
  std::mt19937_64 gen(404);
  long violations_i = 0, violations_ii = 0, cases_i = 0, cases_ii = 0;
  for (int p : {10, 50}) {
    const SignPathPool pool(100000, p, 9);
    const auto full = two_step_k(one_to(p), 0.05, 0.01, p, pool);
    std::vector<std::unique_ptr<KctCalibration>> kcts;
    auto shared = std::make_shared<SignPathPool>(100000, p, 10);
    for (auto kind : {VKind::A, VKind::B, VKind::C, VKind::D}) {
      kcts.push_back(std::make_unique<KctCalibration>(v_family({kind, p, {}}), 0.05, 0.01, p, shared));
    }
    const int draws = p == 10 ? 20 : 50;
    for (int draw = 0; draw < draws; ++draw) {
      const auto stats = random_stats(p, gen);
      std::vector<IndexSet> queries;
      if (p == 10) {
        for (std::uint32_t mask = 0; mask < (1u << p); ++mask) queries.push_back(from_mask(mask, p));
      } else {
        queries = nested_sets(stats);
      }
      const KjiEvaluator kji_full(stats, full);
      const KrEvaluator kr(stats, 0.05);
      for (const auto& R : queries) {
        ++cases_i;
        violations_i += kji_full(R).fdp_upper > kr(R).fdp_upper;
      }
      for (const auto& kct : kcts) {
        const ShortcutEvaluator ct(stats, kct->spec(WeightFamily::indicator));
        const KjiEvaluator kji(stats, kct->base_plan());
        for (const auto& R : queries) {
          ++cases_ii;
          violations_ii += ct(R).fdp_upper > kji(R).fdp_upper;
        }
      }
    }
  }

  const int p = 50;
  const long reps = 200;
  auto pool = std::make_shared<SignPathPool>(100000, p, 7);
  const KctCalibration kct(v_family({VKind::B, p, {}}), 0.05, 0.01, p, pool);
  const auto spec = kct.spec(WeightFamily::indicator);
  const auto generator = direct_w_generator(p, range_set(10, 20));
  long strict = 0;
  for (long rep = 0; rep < reps; ++rep) {
    const auto stats = prepare(generator(static_cast<std::uint64_t>(rep) + 1).raw);
    const ShortcutEvaluator ct(stats, spec);
    const KjiEvaluator kji(stats, kct.base_plan());
    bool any = false;
    for (const auto& R : nested_sets(stats)) any = any || ct(R).fdp_upper < kji(R).fdp_upper;
    strict += any;
  }
  const double share = static_cast<double>(strict) / reps;
  return {violations_i == 0 && violations_ii == 0 && share >= 0.5,
          fmt("(i) %ld/%ld violations; (ii) %ld/%ld violations; (iii) strict gap in %ld/%ld reps = %.2f (>= 0.50)",
              violations_i, cases_i, violations_ii, cases_ii, strict, reps, share)};
}

// Both k_raw formulas, and two exact JS values.
Outcome k_raw_formulas() {
  const auto v = one_to(1000);
  long mismatches = 0;
  for (double alpha : {0.01, 0.05, 0.1, 0.2}) {
    const auto a = k_raw(v, alpha), b = k_raw_closed_form(v, alpha);
    for (std::size_t i = 0; i < v.size(); ++i) mismatches += a[i] != b[i];
  }
  const int js5 = js_v(5, 0.05, 1000), js10 = js_v(10, 0.05, 1000);
  const int oracle5 = oracle::js_v(5, 0.05, 1000), oracle10 = oracle::js_v(10, 0.05, 1000);
  return {mismatches == 0 && js5 == 1 && js10 == 4 && oracle5 == 1 && oracle10 == 4,
          fmt("%ld mismatches over v <= 1000 at 4 alphas; js_v(5)=%d js_v(10)=%d (oracle %d, %d; expected 1, 4)",
              mismatches, js5, js10, oracle5, oracle10)};
}

// Coherence of d(R) = |R| - bound numerator for all disjoint U, V.
Outcome coherence() {
  std::mt19937_64 gen(505);
  const int p = 10;
  const SignPathPool pool(100000, p, 11);
  const auto calibrated = two_step_k(v_family({VKind::B, p, {}}), 0.05, 0.01, p, pool);
  long pairs = 0, violations = 0;
  for (int draw = 0; draw < 12; ++draw) {
    const auto stats = random_stats(p, gen);
    const KjiEvaluator eval(stats, draw % 2 ? calibrated : js_plan(6, 0.05, p));
    std::vector<int> d(1u << p);
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) d[mask] = eval(from_mask(mask, p)).true_discoveries_lower;
    for (std::uint32_t U = 0; U < (1u << p); ++U) {
      const std::uint32_t rest = ((1u << p) - 1) & ~U;
      for (std::uint32_t V = rest;; V = (V - 1) & rest) {
        ++pairs;
        violations += d[U] + d[V] > d[U | V];
        violations += d[U | V] > d[U] + __builtin_popcount(V);
        if (V == 0) break;
      }
    }
  }
  return {violations == 0, fmt("%ld violations over %ld disjoint pairs (p=10, 12 draws)", violations, pairs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"joint probabilities at p=1000", joint_probabilities},
      {"KR equals KJI at k_raw", kr_is_kji},
      {"shortcut equals KJI and KR", shortcut_is_kji_kr},
      {"shortcut equals brute force", shortcut_is_brute_force},
      {"early-stopped event identities", event_identities},
      {"simultaneous coverage", coverage},
      {"uniform dominance", dominance},
      {"k_raw formulas and JS v", k_raw_formulas},
      {"coherence", coherence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !outcome.pass;
    std::printf("%s %zu %-32s %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
