#include <doctest.h>

#include <random>

#include "kfdp/bounds.hpp"
#include "kfdp/error.hpp"
#include "kfdp/simulation.hpp"
#include "oracles.hpp"

using namespace kfdp;

namespace {

PreparedStats from_values(const std::vector<double>& w) {
  std::vector<StatEntry> entries;
  for (std::size_t i = 0; i < w.size(); ++i) entries.push_back({std::to_string(i + 1), w[i]});
  return prepare(RawStats(entries));
}

IndexSet range_set(int lo, int hi) {
  std::vector<int> members;
  for (int i = lo; i <= hi; ++i) members.push_back(i);
  return IndexSet(members);
}

IndexSet from_mask(std::uint32_t mask, int p) { return IndexSet::from_sorted(oracle::members_of(mask, p)); }

VKPlan make_plan(std::vector<int> v, std::vector<int> k, int p, double alpha = 0.05) {
  VKPlan plan;
  plan.v = std::move(v);
  plan.k = std::move(k);
  plan.alpha = alpha;
  plan.horizon_p = p;
  return plan;
}

VKPlan raw_plan(int p, double alpha) {
  std::vector<int> v(p);
  for (int i = 0; i < p; ++i) v[i] = i + 1;
  return make_plan(v, k_raw(v, alpha), p, alpha);
}

}  // namespace

TEST_CASE("interpolation bound") {
  CHECK(interpolation_bound(IndexSet(), IndexSet({1}), 3) == Fraction{0, 1});
  CHECK(interpolation_bound(IndexSet({1, 3}), IndexSet({1, 3, 4}), 2) == Fraction{1, 2});
  // |S| <= k - 1 leaves only the trivial bound.
  const IndexSet S({2, 5});
  for (auto R : {IndexSet({2}), IndexSet({2, 5}), IndexSet({1, 2, 5, 7})}) {
    CHECK(interpolation_bound(R, S, 3) == Fraction{1, 1});
  }
}

TEST_CASE("single-k interpolation") {
  const int p = 30;
  std::vector<double> w(p);
  for (int i = 0; i < p; ++i) w[i] = 1000.0 - i;
  auto strong = from_values(w);
  const auto all = nested_set(strong, p);
  auto report = js_bound(strong, 5, 0.05, all);
  CHECK(report.fdp_upper == Fraction{4, p});
  CHECK(report.true_discoveries_lower == p - 4);
  CHECK(report.method == BoundMethod::js);

  auto mixed = from_values({5, -4, 3, 2, -1, 0.5});
  // S(v=1) = {1}; a set avoiding it gets the trivial bound.
  CHECK(js_bound(mixed, 5, 0.05, IndexSet({3, 4})).fdp_upper == Fraction{1, 1});

  SUBCASE("direct-W setting against a hand oracle") {
    std::mt19937_64 gen(4);
    for (int draw = 0; draw < 5; ++draw) {
      auto stats = prepare(generate_direct_w({50, range_set(10, 20), gen()}));
      const auto ws = oracle::signed_w(stats);
      for (int k : {5, 15, 35}) {
        const int v = oracle::js_v(k, 0.05, 50);
        for (int q = 0; q < 100; ++q) {
          std::vector<int> R;
          for (int i = 1; i <= 50; ++i) {
            if (gen() % 3 == 0) R.push_back(i);
          }
          const auto got = js_bound(stats, k, 0.05, IndexSet(R));
          CHECK(got.fdp_upper.num == oracle::kji_numerator(ws, {v}, {k}, R));
        }
      }
    }
  }
}

TEST_CASE("joint-k interpolation matches the definition on all subsets") {
  std::mt19937_64 gen(8);
  const int p = 12;
  for (int draw = 0; draw < 3; ++draw) {
    auto stats = prepare(RawStats(oracle::random_w(p, gen)));
    const auto ws = oracle::signed_w(stats);
    const auto plan = make_plan({1, 2, 4, 7}, {2, 4, 5, 9}, p);
    const KjiEvaluator eval(stats, plan);
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      const auto R = oracle::members_of(mask, p);
      const auto report = eval(IndexSet::from_sorted(R));
      CHECK(report.fdp_upper.num == oracle::kji_numerator(ws, plan.v, plan.k, R));
      CHECK(report.fdp_upper.den == std::max<std::int64_t>(1, R.size()));
      CHECK(report.true_discoveries_lower == static_cast<int>(R.size() - report.fdp_upper.num));
      if (report.witness > 0) {
        const int i = report.witness - 1;
        CHECK(report.fdp_upper == interpolation_bound(IndexSet(R), reference_set(stats, plan.v[i]), plan.k[i]));
      }
    }
  }
}

TEST_CASE("joint-k plans versus single-k and extra components") {
  std::mt19937_64 gen(12);
  const int p = 10;
  for (int draw = 0; draw < 5; ++draw) {
    auto stats = prepare(RawStats(oracle::random_w(p, gen)));
    const int k = 6;
    const int v = js_v(k, 0.05, p);
    const auto single = make_plan({v}, {k}, p);
    const auto richer = make_plan({v, v + 2, v + 5}, {k, k + 2, k + 5}, p);
    const auto smaller = make_plan({v, v + 2}, {k, k + 2}, p);
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      const auto R = from_mask(mask, p);
      const auto js = js_bound(stats, k, 0.05, R);
      CHECK(kji_bound(stats, single, R).fdp_upper == js.fdp_upper);
      CHECK(kji_bound(stats, richer, R).fdp_upper <= js.fdp_upper);
      CHECK(kji_bound(stats, richer, R).fdp_upper <= kji_bound(stats, smaller, R).fdp_upper);
    }
  }
}

TEST_CASE("plan horizon must match the statistics") {
  auto stats = from_values({5, -4, 3});
  try {
    kji_bound(stats, make_plan({1}, {2}, 4), IndexSet({1}));
    FAIL("expected PlanMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::plan_mismatch);
  }
}

TEST_CASE("interpolated Katsevich-Ramdas bound") {
  auto stats = from_values({5, -4, 3, 2, -1});
  CHECK(kr_bound(stats, 0.05, IndexSet()).fdp_upper == Fraction{0, 1});
  auto negative = from_values({-5, -4, -3});
  for (auto R : {IndexSet({1}), IndexSet({1, 3}), IndexSet({1, 2, 3})}) {
    CHECK(kr_bound(negative, 0.05, R).fdp_upper == Fraction{1, 1});
  }

  std::mt19937_64 gen(21);
  for (int draw = 0; draw < 5; ++draw) {
    const int p = 10;
    auto s = prepare(RawStats(oracle::random_w(p, gen)));
    const auto ws = oracle::signed_w(s);
    const KrEvaluator kr(s, 0.05);
    const KjiEvaluator kji(s, raw_plan(p, 0.05));
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      const auto R = oracle::members_of(mask, p);
      const auto a = kr(IndexSet::from_sorted(R));
      CHECK(a.fdp_upper.num == oracle::kr_numerator(ws, 0.05, R));
      CHECK(a.fdp_upper == kji(IndexSet::from_sorted(R)).fdp_upper);
    }
  }
  for (int draw = 0; draw < 5; ++draw) {
    const int p = 200;
    auto s = prepare(RawStats(oracle::random_w(p, gen, 0.8)));
    const KrEvaluator kr(s, 0.1);
    const KjiEvaluator kji(s, raw_plan(p, 0.1));
    for (const auto& R : nested_sets(s)) CHECK(kr(R).fdp_upper == kji(R).fdp_upper);
  }
}

TEST_CASE("calibrated joint-k bound never exceeds the KR bound") {
  std::mt19937_64 gen(31);
  const int p = 10;
  SignPathPool pool(50000, p, 3);
  std::vector<int> v(p);
  for (int i = 0; i < p; ++i) v[i] = i + 1;
  const auto plan = two_step_k(v, 0.05, 0.01, p, pool);
  for (int draw = 0; draw < 5; ++draw) {
    auto s = prepare(RawStats(oracle::random_w(p, gen)));
    const KjiEvaluator kji(s, plan);
    const KrEvaluator kr(s, 0.05);
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      const auto R = from_mask(mask, p);
      CHECK(kji(R).fdp_upper <= kr(R).fdp_upper);
    }
  }
}

TEST_CASE("general interpolation") {
  const int n = 6;
  const DiscoveryTable zero(1u << n, 0);
  for (std::uint32_t R = 0; R < (1u << n); ++R) CHECK(general_interpolation(zero, R) == 0);

  DiscoveryTable single(1u << n, 0);
  single[(1u << n) - 1] = n - 1;  // K_1 = I, k_1 = 1
  CHECK(general_interpolation(single, (1u << n) - 1) == n - 1);

  // Nested K_i with d(K_i) = |K_i| - k_i simplifies to max_i |R n K_i| - k_i.
  std::mt19937_64 gen(2);
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<std::uint32_t> K;
    std::vector<int> k;
    std::uint32_t current = 0;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    int next = 0;
    const int m = 1 + static_cast<int>(gen() % 3);
    for (int i = 0; i < m && next < n; ++i) {
      const int grow = 1 + static_cast<int>(gen() % 2);
      for (int g = 0; g < grow && next < n; ++g) current |= 1u << order[next++];
      K.push_back(current);
      const int size = __builtin_popcount(current);
      k.push_back(1 + static_cast<int>(gen() % size));
    }
    DiscoveryTable d(1u << n, 0);
    for (std::size_t i = 0; i < K.size(); ++i) d[K[i]] = __builtin_popcount(K[i]) - k[i];
    for (std::uint32_t R = 0; R < (1u << n); ++R) {
      std::int64_t expected = 0;
      for (std::size_t i = 0; i < K.size(); ++i) {
        expected = std::max<std::int64_t>(expected, __builtin_popcount(R & K[i]) - k[i]);
      }
      CHECK(general_interpolation(d, R) == expected);
    }
  }
  CHECK_THROWS_AS(general_interpolation(DiscoveryTable(3, 0), 0), Error);
}

TEST_CASE("true-discovery function from KJI is coherent") {
  std::mt19937_64 gen(40);
  const int p = 8;
  for (int draw = 0; draw < 5; ++draw) {
    auto s = prepare(RawStats(oracle::random_w(p, gen)));
    const KjiEvaluator eval(s, make_plan({1, 2, 3, 5}, {2, 3, 4, 6}, p));
    std::vector<int> d(1u << p);
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) d[mask] = eval(from_mask(mask, p)).true_discoveries_lower;
    long violations = 0;
    for (std::uint32_t U = 0; U < (1u << p); ++U) {
      const std::uint32_t rest = ((1u << p) - 1) & ~U;
      for (std::uint32_t V = rest;; V = (V - 1) & rest) {
        violations += d[U] + d[V] > d[U | V];
        violations += d[U | V] > d[U] + __builtin_popcount(V);
        if (V == 0) break;
      }
    }
    CHECK(violations == 0);
  }
}
