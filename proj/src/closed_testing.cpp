#include "kfdp/closed_testing.hpp"

#include <algorithm>
#include <bit>
#include <mutex>

#include "kfdp/error.hpp"

namespace kfdp {

std::string weight_family_name(WeightFamily family) {
  switch (family) {
    case WeightFamily::indicator: return "indicator";
    case WeightFamily::rank: return "rank";
    case WeightFamily::custom: return "custom";
  }
  return "?";
}

WeightFamily parse_weight_family(const std::string& name) {
  if (name == "indicator") return WeightFamily::indicator;
  if (name == "rank") return WeightFamily::rank;
  if (name == "custom") return WeightFamily::custom;
  throw Error(ErrorCode::invalid_input, "unknown weight family '" + name + "'");
}

namespace {

std::int64_t family_weight(WeightFamily family, const WeightRule& custom, int component, int local_rank,
                           int size, int budget) {
  switch (family) {
    case WeightFamily::indicator: return local_rank > size - budget ? 1 : 0;
    case WeightFamily::rank: return local_rank > size - budget ? local_rank : 0;
    case WeightFamily::custom: return custom(component, local_rank, size, budget);
  }
  return 0;
}

}  // namespace

struct LocalTestSpec::State {
  WeightFamily family;
  RuleProvider provider;
  std::string label;
  WeightRule custom;
  std::mutex mu;
  std::vector<std::unique_ptr<SizeRule>> rules;
};

LocalTestSpec::LocalTestSpec(WeightFamily family, RuleProvider provider, std::string label, WeightRule custom)
    : state_(std::make_shared<State>()) {
  if (family == WeightFamily::custom && !custom) {
    throw Error(ErrorCode::invalid_input, "custom weight family needs a weight rule");
  }
  state_->family = family;
  state_->provider = std::move(provider);
  state_->label = std::move(label);
  state_->custom = std::move(custom);
}

WeightFamily LocalTestSpec::family() const { return state_->family; }
const std::string& LocalTestSpec::label() const { return state_->label; }

const SizeRule& LocalTestSpec::rule(int size) const {
  if (size < 1) throw Error(ErrorCode::invalid_input, "intersection size must be >= 1");
  std::lock_guard lock(state_->mu);
  auto& rules = state_->rules;
  if (rules.size() <= static_cast<std::size_t>(size)) rules.resize(size + 1);
  if (!rules[size]) {
    auto computed = std::make_unique<SizeRule>(state_->provider(size));
    if (computed->budgets.size() != computed->critical.size()) {
      throw Error(ErrorCode::invalid_input, "budgets and critical values differ in length");
    }
    rules[size] = std::move(computed);
  }
  return *rules[size];
}

void LocalTestSpec::warm(int max_size) const {
  for (int s = 1; s <= max_size; ++s) rule(s);
}

std::int64_t LocalTestSpec::weight(int component, int local_rank, int size, int budget) const {
  return family_weight(state_->family, state_->custom, component, local_rank, size, budget);
}

namespace {

// nsim x m table of simulated local statistics.
class StatMatrix {
 public:
  StatMatrix(long rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0) {}
  long rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t at(long r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::int64_t& at(long r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::vector<std::int64_t> column(int c) const {
    std::vector<std::int64_t> out(rows_);
    for (long r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
  }

 private:
  long rows_;
  int cols_;
  std::vector<std::int64_t> data_;
};

long count_joint(const StatMatrix& stats, const std::vector<std::int64_t>& z) {
  long hits = 0;
  for (long r = 0; r < stats.rows(); ++r) {
    int i = 0;
    while (i < stats.cols() && stats.at(r, i) < z[i]) ++i;
    hits += (i == stats.cols());
  }
  return hits;
}

}  // namespace

CriticalValues calibrate_critical_values(int size, WeightFamily family, const std::vector<int>& budgets,
                                         double alpha, const SignPathPool& pool, const WeightRule& custom) {
  if (size < 1) throw Error(ErrorCode::invalid_input, "intersection size must be >= 1");
  if (size > pool.path_length()) throw Error(ErrorCode::invalid_input, "size exceeds the pool path length");
  if (budgets.empty()) throw Error(ErrorCode::invalid_input, "at least one component is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_input, "alpha must lie in (0, 1)");
  if (family == WeightFamily::custom && !custom) {
    throw Error(ErrorCode::invalid_input, "custom weight family needs a weight rule");
  }
  const int m = static_cast<int>(budgets.size());
  const long n = pool.nsim();

  // The members of I are laid on the first |I| steps of each path in
  // decreasing |W| order, so step idx carries local rank size - idx + 1.
  StatMatrix sim(n, m);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < n; ++r) {
    for (int idx = 1; idx <= size; ++idx) {
      if (!pool.positive(r, idx - 1)) continue;
      const int rank = size - idx + 1;
      for (int i = 0; i < m; ++i) sim.at(r, i) += family_weight(family, custom, i + 1, rank, size, budgets[i]);
    }
  }

  const long need = required_count(n, 1.0 - alpha);
  const long marginal_need = required_count(n, 1.0 - alpha / m);
  std::vector<std::int64_t> z(m);
  for (int i = 0; i < m; ++i) {
    auto col = sim.column(i);
    const long pick = std::max<long>(marginal_need, 1) - 1;
    std::nth_element(col.begin(), col.begin() + pick, col.end());
    z[i] = col[pick] + 1;
  }

  std::vector<int> start(z.begin(), z.end());
  auto lowered = greedy_lower(sim, start, need, false);
  CriticalValues out;
  out.z.assign(lowered.begin(), lowered.end());
  out.certificate = static_cast<double>(count_joint(sim, out.z)) / static_cast<double>(n);
  return out;
}

std::int64_t local_stat(const IndexSet& I, const PreparedStats& stats, const LocalTestSpec& spec, int component) {
  if (I.empty()) return 0;
  const int size = static_cast<int>(I.size());
  const SizeRule& rule = spec.rule(size);
  if (component < 1 || component > rule.components()) {
    throw Error(ErrorCode::invalid_input, "component index out of range");
  }
  const int budget = rule.budgets[component - 1];
  std::int64_t total = 0;
  int idx = 0;
  for (int pos : I) {
    ++idx;
    if (pos > stats.p()) throw Error(ErrorCode::invalid_input, "position outside [1, p]");
    if (!stats.positive(pos)) continue;
    const int rank = size - idx + 1;
    total += spec.weight(component, rank, size, budget);
  }
  return total;
}

bool locally_rejected(const IndexSet& I, const PreparedStats& stats, const LocalTestSpec& spec) {
  if (I.empty()) return false;
  const SizeRule& rule = spec.rule(static_cast<int>(I.size()));
  for (int i = 1; i <= rule.components(); ++i) {
    if (local_stat(I, stats, spec, i) >= rule.critical[i - 1]) return true;
  }
  return false;
}

std::vector<int> pi_permutation(const PreparedStats& stats) {
  // Ascending signed order: negatives from the largest |W| down, then
  // positives from the smallest |W| up.
  std::vector<int> pi(stats.p());
  int rank = 0;
  for (int pos = 1; pos <= stats.p(); ++pos) {
    if (!stats.positive(pos)) pi[pos - 1] = ++rank;
  }
  for (int pos = stats.p(); pos >= 1; --pos) {
    if (stats.positive(pos)) pi[pos - 1] = ++rank;
  }
  return pi;
}

LocalTestSpec translate_plan(const VKPlan& plan) {
  plan.validate();
  SizeRule rule;
  for (std::size_t i = 0; i < plan.v.size(); ++i) {
    rule.budgets.push_back(plan.k[i] + plan.v[i] - 1);
    rule.critical.push_back(plan.k[i]);
  }
  if (plan.certificate) rule.certificate = plan.certificate->probability;
  return LocalTestSpec(WeightFamily::indicator, [rule](int) { return rule; }, "kji-translated");
}

LocalTestSpec kr_spec(double alpha) {
  c_alpha(alpha);
  return LocalTestSpec(
      WeightFamily::indicator,
      [alpha](int size) {
        std::vector<int> v(size);
        for (int i = 0; i < size; ++i) v[i] = i + 1;
        const auto k = k_raw_closed_form(v, alpha);
        SizeRule rule;
        for (int i = 0; i < size; ++i) {
          rule.budgets.push_back(k[i] + i);
          rule.critical.push_back(k[i]);
        }
        return rule;
      },
      "kr-translated");
}

struct KctCalibration::Cache {
  std::mutex mu;
  std::vector<std::unique_ptr<SizePlan>> plans;
};

KctCalibration::KctCalibration(std::vector<int> v, double alpha, double delta, int p,
                               std::shared_ptr<const SignPathPool> pool)
    : v_(std::move(v)), alpha_(alpha), delta_(delta), p_(p), pool_(std::move(pool)),
      cache_(std::make_shared<Cache>()) {
  if (!pool_) throw Error(ErrorCode::invalid_input, "a sign-path pool is required");
  if (p_ > pool_->path_length()) throw Error(ErrorCode::invalid_input, "pool paths are shorter than p");
  base_plan_ = two_step_k(v_, alpha_, delta_, p_, *pool_);
}

const KctCalibration::SizePlan& KctCalibration::at(int size) const {
  if (size < 1 || size > p_) throw Error(ErrorCode::invalid_input, "intersection size outside [1, p]");
  std::lock_guard lock(cache_->mu);
  auto& plans = cache_->plans;
  if (plans.size() <= static_cast<std::size_t>(size)) plans.resize(size + 1);
  if (plans[size]) return *plans[size];

  auto plan = std::make_unique<SizePlan>();
  std::size_t keep = 0;
  while (keep < v_.size() && v_[keep] <= size) ++keep;
  if (keep < v_.size()) ++keep;
  plan->v.assign(v_.begin(), v_.begin() + keep);
  const std::vector<int> base_k(base_plan_.k.begin(), base_plan_.k.begin() + keep);

  if (size == p_ && keep == v_.size()) {
    plan->k = base_plan_.k;
    plan->certificate = base_plan_.certificate->probability;
  } else {
    const auto fresh = two_step_k(plan->v, alpha_, delta_, size, *pool_);
    bool dominated = true;
    for (std::size_t i = 0; i < keep; ++i) dominated = dominated && fresh.k[i] <= base_k[i];
    if (dominated) {
      plan->k = fresh.k;
      plan->certificate = fresh.certificate->probability;
    } else {
      // The base plan is feasible at every smaller horizon on the same pool.
      const auto counts = kernels::early_stopped_matrix(*pool_, plan->v, size);
      const long need = required_count(pool_->nsim(), 1.0 - alpha_);
      plan->k = greedy_lower(counts, base_k, need, true);
      plan->certificate = static_cast<double>(kernels::count_joint_below(counts, plan->k)) /
                          static_cast<double>(pool_->nsim());
      plan->from_base = true;
    }
  }
  plans[size] = std::move(plan);
  return *plans[size];
}

LocalTestSpec KctCalibration::spec(WeightFamily family) const {
  if (family == WeightFamily::custom) {
    throw Error(ErrorCode::invalid_input, "KCT calibration supports indicator and rank weights");
  }
  KctCalibration self = *this;
  return LocalTestSpec(
      family,
      [self, family](int size) {
        const auto& plan = self.at(size);
        SizeRule rule;
        for (std::size_t i = 0; i < plan.v.size(); ++i) rule.budgets.push_back(plan.k[i] + plan.v[i] - 1);
        if (family == WeightFamily::indicator) {
          rule.critical.assign(plan.k.begin(), plan.k.end());
          rule.certificate = plan.certificate;
        } else {
          auto cv = calibrate_critical_values(size, family, rule.budgets, self.alpha_, *self.pool_);
          rule.critical = std::move(cv.z);
          rule.certificate = cv.certificate;
        }
        return rule;
      },
      family == WeightFamily::indicator ? "kct" : "kct-rank");
}

ShortcutEvaluator::ShortcutEvaluator(const PreparedStats& stats, LocalTestSpec spec)
    : stats_(&stats), spec_(std::move(spec)), pi_(pi_permutation(stats)) {
  by_pi_.resize(stats.p());
  for (int pos = 1; pos <= stats.p(); ++pos) by_pi_[pi_[pos - 1] - 1] = pos;
  rules_.assign(stats.p() + 1, nullptr);
  for (int s = 1; s <= stats.p(); ++s) rules_[s] = &spec_.rule(s);
}

bool ShortcutEvaluator::accepts(const std::vector<char>& member, int size) const {
  const SizeRule& rule = *rules_[size];
  const int m = rule.components();
  const WeightFamily family = spec_.family();

  int limit = size;
  if (family != WeightFamily::custom) {
    limit = 0;
    for (int b : rule.budgets) limit = std::max(limit, std::min(b, size));
  }

  // prefix[idx] = statistic over the first idx members (in |W| order).
  thread_local std::vector<std::int64_t> prefix;
  thread_local std::vector<char> flags;
  prefix.assign(limit + 1, 0);
  flags.assign(limit + 1, 0);
  int idx = 0;
  for (int pos = 1; pos <= stats_->p() && idx < limit; ++pos) {
    if (!member[pos - 1]) continue;
    ++idx;
    const bool plus = stats_->positive(pos);
    flags[idx] = plus;
    const std::int64_t w = family == WeightFamily::rank ? size - idx + 1 : 1;
    prefix[idx] = prefix[idx - 1] + (plus ? w : 0);
  }

  for (int i = 0; i < m; ++i) {
    std::int64_t stat = 0;
    if (family == WeightFamily::custom) {
      for (int j = 1; j <= limit; ++j) {
        if (flags[j]) stat += spec_.weight(i + 1, size - j + 1, size, rule.budgets[i]);
      }
    } else {
      stat = prefix[std::clamp(rule.budgets[i], 0, size)];
    }
    if (stat >= rule.critical[i]) return false;
  }
  return true;
}

CTOutcome ShortcutEvaluator::operator()(const IndexSet& R) const {
  CTOutcome out;
  out.query = R;
  const int s = static_cast<int>(R.size());
  out.fdp_upper = Fraction{0, std::max(1, s)};
  if (s == 0) return out;

  std::vector<int> r_by_pi(R.begin(), R.end());
  for (int pos : r_by_pi) {
    if (pos > stats_->p()) throw Error(ErrorCode::invalid_input, "position outside [1, p]");
  }
  std::sort(r_by_pi.begin(), r_by_pi.end(), [&](int a, int b) { return pi_[a - 1] < pi_[b - 1]; });

  const int p = stats_->p();
  std::vector<char> member(p, 0);
  for (int t = s; t >= 1; --t) {
    std::fill(member.begin(), member.end(), 0);
    for (int j = 0; j < t; ++j) member[r_by_pi[j] - 1] = 1;
    int size = t;
    int r = 0;
    if (accepts(member, size)) {
      out.t_bound = t;
      out.witness_t = t;
      out.witness_r = 0;
      out.fdp_upper = Fraction{t, s};
      return out;
    }
    for (int pos : by_pi_) {
      if (member[pos - 1]) continue;
      member[pos - 1] = 1;
      ++size;
      ++r;
      if (accepts(member, size)) {
        out.t_bound = t;
        out.witness_t = t;
        out.witness_r = r;
        out.fdp_upper = Fraction{t, s};
        return out;
      }
    }
  }
  return out;
}

CTOutcome shortcut_bound(const IndexSet& R, const PreparedStats& stats, const LocalTestSpec& spec) {
  return ShortcutEvaluator(stats, spec)(R);
}

BruteForceClosedTesting::BruteForceClosedTesting(const PreparedStats& stats, const LocalTestSpec& spec)
    : p_(stats.p()) {
  if (p_ > max_p) {
    throw Error(ErrorCode::oracle_size_exceeded,
                "brute-force closed testing is limited to p <= " + std::to_string(max_p));
  }
  const std::uint32_t full = 1u << p_;
  rejected_.assign(full, 0);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    std::vector<int> members;
    for (int b = 0; b < p_; ++b) {
      if (mask >> b & 1u) members.push_back(b + 1);
    }
    rejected_[mask] = kfdp::locally_rejected(IndexSet::from_sorted(std::move(members)), stats, spec);
  }

  // open[I] = some superset of I is locally accepted, i.e. closed testing keeps H_I.
  std::vector<char> open(full);
  for (std::uint32_t mask = 0; mask < full; ++mask) open[mask] = !rejected_[mask];
  for (int b = 0; b < p_; ++b) {
    for (std::uint32_t mask = 0; mask < full; ++mask) {
      if (!(mask >> b & 1u)) open[mask] = open[mask] || open[mask | (1u << b)];
    }
  }

  largest_open_subset_.assign(full, 0);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    if (open[mask]) {
      largest_open_subset_[mask] = std::popcount(mask);
      continue;
    }
    int best = 0;
    for (int b = 0; b < p_; ++b) {
      if (mask >> b & 1u) best = std::max(best, largest_open_subset_[mask ^ (1u << b)]);
    }
    largest_open_subset_[mask] = best;
  }
}

CTOutcome BruteForceClosedTesting::operator()(const IndexSet& R) const {
  std::uint32_t mask = 0;
  for (int pos : R) {
    if (pos > p_) throw Error(ErrorCode::invalid_input, "position outside [1, p]");
    mask |= 1u << (pos - 1);
  }
  CTOutcome out;
  out.query = R;
  out.t_bound = largest_open_subset_[mask];
  out.fdp_upper = Fraction{out.t_bound, std::max<std::int64_t>(1, static_cast<std::int64_t>(R.size()))};
  return out;
}

CTOutcome brute_force_ct(const IndexSet& R, const PreparedStats& stats, const LocalTestSpec& spec) {
  return BruteForceClosedTesting(stats, spec)(R);
}

CTOutcome kct_bound(const IndexSet& R, const PreparedStats& stats, const KctCalibration& calibration,
                    WeightFamily family) {
  return shortcut_bound(R, stats, calibration.spec(family));
}

}  // namespace kfdp
