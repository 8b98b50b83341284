#include "kfdp/simulation.hpp"

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <cctype>
#include <exception>
#include <iomanip>
#include <mutex>

#include "kfdp/bounds.hpp"
#include "kfdp/calibration.hpp"
#include "kfdp/closed_testing.hpp"
#include "kfdp/error.hpp"

namespace kfdp {

RawStats generate_direct_w(const DirectWConfig& config) {
  if (config.p < 1) throw Error(ErrorCode::invalid_input, "p must be >= 1");
  for (int pos : config.null_set) {
    if (pos > config.p) throw Error(ErrorCode::invalid_input, "null set must lie inside [1, p]");
  }
  std::mt19937_64 gen(config.seed);
  std::vector<StatEntry> entries;
  entries.reserve(config.p);
  for (int i = 1; i <= config.p; ++i) {
    // Only nulls consume the stream, so the draw depends on the null set.
    double sign = 1.0;
    if (config.null_set.contains(i)) sign = (gen() >> 63) ? 1.0 : -1.0;
    entries.push_back({std::to_string(i), sign * (config.p - i + 1)});
  }
  return RawStats(std::move(entries));
}

Generator direct_w_generator(int p, IndexSet null_set) {
  for (int pos : null_set) {
    if (pos > p) throw Error(ErrorCode::invalid_input, "null set must lie inside [1, p]");
  }
  return [p, null_set = std::move(null_set)](std::uint64_t seed) {
    SimDraw draw;
    draw.raw = generate_direct_w({p, null_set, seed});
    for (int pos : null_set) draw.null_ids.insert(std::to_string(pos));
    return draw;
  };
}

Fraction true_fdp(const PreparedStats& stats, const std::unordered_set<std::string>& null_ids, const IndexSet& R) {
  std::int64_t false_hits = 0;
  for (int pos : R) false_hits += null_ids.contains(stats.id_at(pos));
  return Fraction{false_hits, std::max<std::int64_t>(1, static_cast<std::int64_t>(R.size()))};
}

namespace {

VKind family_suffix(const std::string& name, std::size_t at) {
  if (name.size() != at + 1) throw Error(ErrorCode::invalid_input, "unknown method '" + name + "'");
  return parse_vkind(std::string(1, static_cast<char>(std::toupper(name[at]))));
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::vector<SimMethod> make_methods(const std::vector<std::string>& names, int p, const MethodOptions& options) {
  const int cap = options.v_cap > 0 ? options.v_cap : p;
  std::shared_ptr<const SignPathPool> pool;
  auto shared_pool = [&] {
    if (!pool) pool = std::make_shared<SignPathPool>(options.nsim, p, options.pool_seed);
    return pool;
  };

  std::vector<SimMethod> out;
  for (const auto& raw_name : names) {
    std::string name = raw_name;
    for (auto& ch : name) ch = static_cast<char>(std::tolower(ch));
    SimMethod method;
    method.label = raw_name;

    if (starts_with(name, "js-")) {
      const auto digits = name.substr(3);
      if (digits.empty() || digits.size() > 6 || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
        throw Error(ErrorCode::invalid_input, "bad method name '" + raw_name + "' (expected js-<k>)");
      }
      const int k = std::stoi(digits);
      auto plan = std::make_shared<VKPlan>(js_plan(k, options.alpha, p));
      method.bind = [plan](const PreparedStats& stats) -> QueryBound {
        auto eval = std::make_shared<KjiEvaluator>(stats, *plan);
        return [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
      };
    } else if (name == "kr") {
      const double alpha = options.alpha;
      method.bind = [alpha](const PreparedStats& stats) -> QueryBound {
        auto eval = std::make_shared<KrEvaluator>(stats, alpha);
        return [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
      };
    } else if (starts_with(name, "kji-")) {
      const auto v = v_family({family_suffix(name, 4), cap, {}});
      auto plan = std::make_shared<VKPlan>(two_step_k(v, options.alpha, options.delta, p, *shared_pool()));
      method.bind = [plan](const PreparedStats& stats) -> QueryBound {
        auto eval = std::make_shared<KjiEvaluator>(stats, *plan);
        return [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
      };
    } else if (starts_with(name, "kct-")) {
      const bool rank = starts_with(name, "kct-rank-");
      const auto kind = family_suffix(name, rank ? 9 : 4);
      KctCalibration calibration(v_family({kind, cap, {}}), options.alpha, options.delta, p, shared_pool());
      auto spec = calibration.spec(rank ? WeightFamily::rank : WeightFamily::indicator);
      spec.warm(p);
      method.bind = [spec](const PreparedStats& stats) -> QueryBound {
        auto eval = std::make_shared<ShortcutEvaluator>(stats, spec);
        return [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
      };
    } else {
      throw Error(ErrorCode::invalid_input, "unknown method '" + raw_name + "'");
    }
    out.push_back(std::move(method));
  }
  return out;
}

QueryBuilder nested_plus_random(int random_subsets) {
  return [random_subsets](const PreparedStats& stats, std::mt19937_64& gen) {
    auto queries = nested_sets(stats);
    const int p = stats.p();
    std::vector<int> universe(p);
    for (int i = 0; i < p; ++i) universe[i] = i + 1;
    std::uniform_int_distribution<int> size_dist(1, p);
    for (int q = 0; q < random_subsets; ++q) {
      const int size = size_dist(gen);
      // Partial Fisher-Yates for a uniform subset of the drawn size.
      for (int j = 0; j < size; ++j) {
        std::uniform_int_distribution<int> pick(j, p - 1);
        std::swap(universe[j], universe[pick(gen)]);
      }
      queries.emplace_back(std::vector<int>(universe.begin(), universe.begin() + size));
    }
    return queries;
  };
}

std::mt19937_64 replication_stream(std::uint64_t seed, long rep, std::uint64_t salt) {
  const auto r = static_cast<std::uint64_t>(rep);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

std::pair<double, double> clopper_pearson(long x, long n, double level) {
  if (n < 1 || x < 0 || x > n) throw Error(ErrorCode::invalid_input, "need 0 <= x <= n and n >= 1");
  const double tail = (1.0 - level) / 2.0;
  const double lo = x == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1), tail);
  const double hi = x == n ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(x + 1, n - x), 1 - tail);
  return {lo, hi};
}

namespace {

// Runs body(rep) for every replication in parallel; the first exception is
// rethrown once all threads are done.
template <class Body>
void for_each_replication(long reps, Body&& body) {
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (long rep = 0; rep < reps; ++rep) {
    try {
      body(rep);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ExperimentResult coverage_experiment(const Generator& generator, const std::vector<SimMethod>& methods, long reps,
                                     double alpha, const QueryBuilder& queries, std::uint64_t seed) {
  if (reps < 1) throw Error(ErrorCode::invalid_input, "reps must be >= 1");
  const std::size_t nm = methods.size();
  std::vector<char> violated(static_cast<std::size_t>(reps) * nm, 0);

  for_each_replication(reps, [&](long rep) {
    auto data_stream = replication_stream(seed, rep, 0);
    const SimDraw draw = generator(data_stream());
    const PreparedStats stats = prepare(draw.raw);
    auto query_stream = replication_stream(seed, rep, 1);
    const auto sets = queries(stats, query_stream);
    std::vector<Fraction> fdp;
    fdp.reserve(sets.size());
    for (const auto& R : sets) fdp.push_back(true_fdp(stats, draw.null_ids, R));

    for (std::size_t j = 0; j < nm; ++j) {
      const auto bound = methods[j].bind(stats);
      for (std::size_t q = 0; q < sets.size(); ++q) {
        if (fdp[q] > bound(sets[q])) {
          violated[static_cast<std::size_t>(rep) * nm + j] = 1;
          break;
        }
      }
    }
  });

  ExperimentResult result;
  result.reps = reps;
  result.alpha = alpha;
  result.seed = seed;
  for (std::size_t j = 0; j < nm; ++j) {
    CoverageRow row;
    row.method = methods[j].label;
    row.reps = reps;
    for (long rep = 0; rep < reps; ++rep) row.violations += violated[static_cast<std::size_t>(rep) * nm + j];
    row.rate = static_cast<double>(row.violations) / static_cast<double>(reps);
    std::tie(row.ci_low, row.ci_high) = clopper_pearson(row.violations, reps);
    result.rows.push_back(row);
  }
  return result;
}

ComparisonTable comparison_experiment(const Generator& generator, const std::vector<SimMethod>& methods, long reps,
                                      std::uint64_t seed) {
  if (reps < 1) throw Error(ErrorCode::invalid_input, "reps must be >= 1");
  if (methods.empty()) throw Error(ErrorCode::invalid_input, "at least one method is required");
  const std::size_t nm = methods.size();

  // Per-replication values are kept and summed in replication order so the
  // output does not depend on the thread count.
  struct RepValues {
    std::vector<int> size;
    std::vector<double> fdp;
    std::vector<double> bound;  // i-major, nm per row
    std::vector<char> strict;
  };
  std::vector<RepValues> per_rep(reps);
  int p = -1;
  std::mutex p_mu;

  for_each_replication(reps, [&](long rep) {
    auto data_stream = replication_stream(seed, rep, 0);
    const SimDraw draw = generator(data_stream());
    const PreparedStats stats = prepare(draw.raw);
    {
      std::lock_guard lock(p_mu);
      if (p < 0) p = stats.p();
      if (p != stats.p()) throw Error(ErrorCode::invalid_input, "replications must share p after preprocessing");
    }
    const auto sets = nested_sets(stats);
    RepValues& values = per_rep[rep];
    values.strict.assign(nm, 0);
    std::vector<QueryBound> bounds;
    for (const auto& m : methods) bounds.push_back(m.bind(stats));
    for (const auto& R : sets) {
      values.size.push_back(static_cast<int>(R.size()));
      values.fdp.push_back(true_fdp(stats, draw.null_ids, R).value());
      const Fraction first = bounds[0](R);
      values.bound.push_back(first.value());
      for (std::size_t j = 1; j < nm; ++j) {
        const Fraction b = bounds[j](R);
        values.bound.push_back(b.value());
        if (b < first) values.strict[j] = 1;
      }
    }
  });

  ComparisonTable table;
  table.reps = reps;
  for (const auto& m : methods) table.methods.push_back(m.label);
  table.strictly_below_first.assign(nm, 0);
  table.rows.resize(p);
  for (int i = 0; i < p; ++i) {
    table.rows[i].i = i + 1;
    table.rows[i].mean_bound.assign(nm, 0.0);
  }
  for (const auto& values : per_rep) {
    for (int i = 0; i < p; ++i) {
      table.rows[i].mean_size += values.size[i];
      table.rows[i].mean_true_fdp += values.fdp[i];
      for (std::size_t j = 0; j < nm; ++j) table.rows[i].mean_bound[j] += values.bound[i * nm + j];
    }
    for (std::size_t j = 0; j < nm; ++j) table.strictly_below_first[j] += values.strict[j];
  }
  for (auto& row : table.rows) {
    row.mean_size /= reps;
    row.mean_true_fdp /= reps;
    for (auto& b : row.mean_bound) b /= reps;
  }
  return table;
}

void write_csv(std::ostream& out, const ComparisonTable& table) {
  out << "i,mean_size,mean_true_fdp";
  for (const auto& m : table.methods) out << ',' << m;
  out << '\n';
  out << std::fixed << std::setprecision(6);
  for (const auto& row : table.rows) {
    out << row.i << ',' << row.mean_size << ',' << row.mean_true_fdp;
    for (double b : row.mean_bound) out << ',' << b;
    out << '\n';
  }
}

void write_csv(std::ostream& out, const ExperimentResult& result) {
  out << "method,reps,violations,rate,ci_low,ci_high\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : result.rows) {
    out << row.method << ',' << row.reps << ',' << row.violations << ',' << row.rate << ',' << row.ci_low << ','
        << row.ci_high << '\n';
  }
}

}  // namespace kfdp
