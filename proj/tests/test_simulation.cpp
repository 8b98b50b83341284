#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <sstream>

#include "kfdp/error.hpp"
#include "kfdp/simulation.hpp"

using namespace kfdp;

namespace {

IndexSet range_set(int lo, int hi) {
  std::vector<int> members;
  for (int i = lo; i <= hi; ++i) members.push_back(i);
  return IndexSet(members);
}

SimMethod constant_method(const std::string& label, Fraction value) {
  return {label, [value](const PreparedStats&) { return [value](const IndexSet&) { return value; }; }};
}

}  // namespace

TEST_CASE("direct-W generator") {
  const auto raw = generate_direct_w({50, range_set(10, 20), 3});
  REQUIRE(raw.size() == 50);
  for (int i = 1; i <= 50; ++i) {
    const auto& e = raw.entries()[i - 1];
    CHECK(e.id == std::to_string(i));
    CHECK(std::abs(e.w) == 51 - i);
    if (i < 10 || i > 20) CHECK(e.w > 0);
  }
  const auto again = generate_direct_w({50, range_set(10, 20), 3});
  for (int i = 0; i < 50; ++i) CHECK(again.entries()[i].w == raw.entries()[i].w);

  // Null signs are fair coins: per-position frequencies over many seeds.
  const int seeds = 4000;
  std::vector<int> plus(11, 0);
  for (int seed = 0; seed < seeds; ++seed) {
    const auto draw = generate_direct_w({50, range_set(10, 20), static_cast<std::uint64_t>(seed)});
    for (int i = 10; i <= 20; ++i) plus[i - 10] += draw.entries()[i - 1].w > 0;
  }
  double chi2 = 0.0;
  for (int c : plus) chi2 += std::pow(c - seeds / 2.0, 2) / (seeds / 4.0);
  CHECK(chi2 < 31.26);  // chi-square(11) upper 0.001 point
}

TEST_CASE("true FDP from the generator ground truth") {
  const auto gen = direct_w_generator(10, range_set(3, 5));
  const auto draw = gen(1);
  CHECK(draw.null_ids == std::unordered_set<std::string>{"3", "4", "5"});
  const auto stats = prepare(draw.raw);
  int nulls_in = 0, size = 0;
  for (int pos = 1; pos <= stats.p(); ++pos) {
    if (!stats.positive(pos)) continue;
    ++size;
    nulls_in += draw.null_ids.contains(stats.id_at(pos));
  }
  CHECK(true_fdp(stats, draw.null_ids, nested_set(stats, stats.p())) == Fraction{nulls_in, size});
  CHECK(true_fdp(stats, draw.null_ids, IndexSet()) == Fraction{0, 1});
}

TEST_CASE("method names") {
  MethodOptions options;
  options.nsim = 5000;
  const auto methods = make_methods({"js-5", "kr", "kji-a", "kct-b", "kct-rank-c"}, 20, options);
  REQUIRE(methods.size() == 5);
  CHECK_THROWS_AS(make_methods({"kji-e"}, 20, options), Error);
  CHECK_THROWS_AS(make_methods({"js-x"}, 20, options), Error);
  CHECK_THROWS_AS(make_methods({"nope"}, 20, options), Error);
}

TEST_CASE("coverage experiment on trivial bounds") {
  const auto gen = direct_w_generator(20, range_set(5, 12));
  const std::vector<SimMethod> methods{constant_method("one", {1, 1}), constant_method("zero", {0, 1})};
  const auto result = coverage_experiment(gen, methods, 60, 0.05, nested_plus_random(10), 5);
  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].violations == 0);
  CHECK(result.rows[0].ci_low == 0.0);
  // R_p holds every positive null; with 8 nulls some is positive unless all
  // eight coins come up negative.
  CHECK(result.rows[1].violations >= 55);
  CHECK(result.rows[1].reps == 60);
  CHECK(result.rows[1].rate == doctest::Approx(result.rows[1].violations / 60.0));
}

TEST_CASE("experiments are reproducible across thread counts") {
  MethodOptions options;
  options.nsim = 5000;
  const int p = 20;
  const auto methods = make_methods({"kji-b", "kct-b", "kr"}, p, options);
  const auto gen = direct_w_generator(p, range_set(4, 8));
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::ostringstream a, b;
    write_csv(a, comparison_experiment(gen, methods, 6, 11));
    write_csv(b, coverage_experiment(gen, methods, 6, 0.05, nested_plus_random(5), 11));
    return a.str() + b.str();
  };
  const auto one = run(1);
  CHECK(one == run(3));
  CHECK(one == run(1));
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("comparison table shape and dominance") {
  MethodOptions options;
  options.nsim = 20000;
  const int p = 30;
  const auto methods = make_methods({"kji-b", "kct-b"}, p, options);
  const auto table = comparison_experiment(direct_w_generator(p, range_set(6, 12)), methods, 8, 2);
  CHECK(table.reps == 8);
  CHECK(table.methods == std::vector<std::string>{"kji-b", "kct-b"});
  REQUIRE(table.rows.size() == static_cast<std::size_t>(p));
  for (const auto& row : table.rows) {
    CHECK(row.mean_bound[1] <= row.mean_bound[0] + 1e-12);
    CHECK(row.mean_true_fdp >= 0.0);
  }
  CHECK(table.strictly_below_first[0] == 0);
  std::ostringstream out;
  write_csv(out, table);
  std::string header;
  std::getline(std::istringstream(out.str()), header);
  CHECK(header == "i,mean_size,mean_true_fdp,kji-b,kct-b");
}

TEST_CASE("Clopper-Pearson interval") {
  auto [lo0, hi0] = clopper_pearson(0, 10);
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-9));
  auto [lo1, hi1] = clopper_pearson(10, 10);
  CHECK(lo1 == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-9));
  CHECK(hi1 == 1.0);
  auto [lo, hi] = clopper_pearson(5, 10);
  CHECK(lo == doctest::Approx(0.187086).epsilon(1e-5));
  CHECK(hi == doctest::Approx(0.812914).epsilon(1e-5));
  CHECK_THROWS_AS(clopper_pearson(11, 10), Error);
}

TEST_CASE("replication streams are distinct") {
  auto a = replication_stream(1, 0, 0), b = replication_stream(1, 1, 0), c = replication_stream(1, 0, 1);
  auto a2 = replication_stream(1, 0, 0);
  const auto x = a();
  CHECK(x == a2());
  CHECK(x != b());
  CHECK(x != c());
}
