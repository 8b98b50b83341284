#pragma once

// Synthetic knockoff statistic vectors with the coin-flip property, and the
// coverage / comparison experiments run over them.

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "kfdp/rational.hpp"
#include "kfdp/sign_pool.hpp"
#include "kfdp/stats.hpp"

namespace kfdp {

// |W_i| = p - i + 1; sign +1 off the null set, fair coin on it.
struct DirectWConfig {
  int p = 50;
  IndexSet null_set;
  std::uint64_t seed = 0;
};

// Ids are the original indices "1".."p".
RawStats generate_direct_w(const DirectWConfig& config);

// One simulated dataset with its ground truth.
struct SimDraw {
  RawStats raw;
  std::unordered_set<std::string> null_ids;
};

using Generator = std::function<SimDraw(std::uint64_t seed)>;

Generator direct_w_generator(int p, IndexSet null_set);

// FDP of R against the known nulls.
Fraction true_fdp(const PreparedStats& stats, const std::unordered_set<std::string>& null_ids, const IndexSet& R);

using QueryBound = std::function<Fraction(const IndexSet&)>;

// A bound bound to one dataset. bind() may keep references to the stats.
struct SimMethod {
  std::string label;
  std::function<QueryBound(const PreparedStats&)> bind;
};

struct MethodOptions {
  double alpha = 0.05;
  double delta = 0.01;
  long nsim = 100000;
  std::uint64_t pool_seed = 7;
  int v_cap = 0;  // exclusive cap on v; 0 means p
};

// Names: js-<k>, kr, kji-{a,b,c,d}, kct-{a,b,c,d}, kct-rank-{a,b,c,d}. Plans and
// per-size tables are calibrated here, once, for datasets with p statistics.
std::vector<SimMethod> make_methods(const std::vector<std::string>& names, int p, const MethodOptions& options);

using QueryBuilder = std::function<std::vector<IndexSet>(const PreparedStats&, std::mt19937_64&)>;

// All nested sets plus `random_subsets` uniformly drawn subsets, stratified
// by size (size uniform on 1..p, then a uniform subset of that size).
QueryBuilder nested_plus_random(int random_subsets);

struct CoverageRow {
  std::string method;
  long reps = 0;
  long violations = 0;
  double rate = 0.0;
  double ci_low = 0.0;  // exact 95% binomial interval
  double ci_high = 0.0;
};

struct ExperimentResult {
  std::vector<CoverageRow> rows;
  long reps = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

// Per replication: does some query have FDP > bound? Replications use
// independent streams derived from (seed, replication index).
ExperimentResult coverage_experiment(const Generator& generator, const std::vector<SimMethod>& methods, long reps,
                                     double alpha, const QueryBuilder& queries, std::uint64_t seed);

struct ComparisonRow {
  int i = 0;
  double mean_size = 0.0;
  double mean_true_fdp = 0.0;
  std::vector<double> mean_bound;  // one per method
};

struct ComparisonTable {
  std::vector<std::string> methods;
  std::vector<ComparisonRow> rows;
  // Replications where some nested set has bound(method j) < bound(method 0).
  std::vector<long> strictly_below_first;
  long reps = 0;
};

// Mean bounds on the nested sets R_1..R_p.
ComparisonTable comparison_experiment(const Generator& generator, const std::vector<SimMethod>& methods, long reps,
                                      std::uint64_t seed);

void write_csv(std::ostream& out, const ComparisonTable& table);
void write_csv(std::ostream& out, const ExperimentResult& result);

// Exact (Clopper-Pearson) two-sided interval for x successes in n trials.
std::pair<double, double> clopper_pearson(long x, long n, double level = 0.95);

// Independent stream for replication `rep` of an experiment seeded by `seed`.
std::mt19937_64 replication_stream(std::uint64_t seed, long rep, std::uint64_t salt);

}  // namespace kfdp
