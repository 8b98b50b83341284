#include "kfdp/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "kfdp/error.hpp"

namespace kfdp {

std::string method_name(BoundMethod method) {
  switch (method) {
    case BoundMethod::js: return "JS";
    case BoundMethod::kji: return "KJI";
    case BoundMethod::kr: return "KR";
    case BoundMethod::kct: return "KCT";
  }
  return "?";
}

namespace {

BoundReport make_report(const IndexSet& R, std::int64_t numerator, int witness, BoundMethod method) {
  BoundReport report;
  const auto size = static_cast<std::int64_t>(R.size());
  report.query = R;
  report.fdp_upper = Fraction{numerator, std::max<std::int64_t>(1, size)};
  report.true_discoveries_lower = static_cast<int>(size - numerator);
  report.witness = witness;
  report.method = method;
  return report;
}

}  // namespace

Fraction interpolation_bound(const IndexSet& R, const IndexSet& S, int k) {
  const auto size = static_cast<std::int64_t>(R.size());
  std::int64_t outside = 0;
  for (int pos : R) outside += !S.contains(pos);
  return Fraction{std::min(size, k - 1 + outside), std::max<std::int64_t>(1, size)};
}

KjiEvaluator::KjiEvaluator(const PreparedStats& stats, const VKPlan& plan) : stats_(&stats), k_(plan.k) {
  plan.validate();
  if (plan.horizon_p != stats.p()) {
    throw Error(ErrorCode::plan_mismatch, "plan horizon p=" + std::to_string(plan.horizon_p) +
                                              " does not match the statistics (p=" +
                                              std::to_string(stats.p()) + ")");
  }
  cutoffs_.reserve(plan.v.size());
  for (int v : plan.v) cutoffs_.push_back(stats.reference_cutoff(v));
}

BoundReport KjiEvaluator::operator()(const IndexSet& R) const {
  const auto size = static_cast<std::int64_t>(R.size());
  std::int64_t best = size;
  int witness = 0;
  // Cutoffs are nondecreasing, so |R n S(v_i)| is a running count.
  auto it = R.begin();
  std::int64_t inside = 0;
  for (std::size_t i = 0; i < cutoffs_.size(); ++i) {
    while (it != R.end() && *it <= cutoffs_[i]) {
      inside += stats_->positive(*it);
      ++it;
    }
    const std::int64_t term = k_[i] - 1 + (size - inside);
    if (term < best) {
      best = term;
      witness = static_cast<int>(i) + 1;
    }
  }
  return make_report(R, best, witness, BoundMethod::kji);
}

KrEvaluator::KrEvaluator(const PreparedStats& stats, double alpha) : stats_(&stats) {
  const double c = c_alpha(alpha);
  slack_.reserve(stats.p());
  for (int i = 1; i <= stats.p(); ++i) {
    const int n = 1 + stats.negatives_upto(i);
    slack_.push_back(static_cast<std::int64_t>(std::floor(c * n)));
  }
}

BoundReport KrEvaluator::operator()(const IndexSet& R) const {
  const auto size = static_cast<std::int64_t>(R.size());
  std::int64_t best = size;
  int witness = 0;
  auto it = R.begin();
  std::int64_t inside = 0;
  for (int i = 1; i <= stats_->p(); ++i) {
    while (it != R.end() && *it <= i) {
      inside += stats_->positive(*it);
      ++it;
    }
    const std::int64_t term = (size - inside) + slack_[i - 1];
    if (term < best) {
      best = term;
      witness = i;
    }
  }
  return make_report(R, best, witness, BoundMethod::kr);
}

BoundReport js_bound(const PreparedStats& stats, int k, double alpha, const IndexSet& R) {
  const auto plan = js_plan(k, alpha, stats.p());
  auto report = KjiEvaluator(stats, plan)(R);
  report.method = BoundMethod::js;
  return report;
}

BoundReport kji_bound(const PreparedStats& stats, const VKPlan& plan, const IndexSet& R) {
  return KjiEvaluator(stats, plan)(R);
}

BoundReport kr_bound(const PreparedStats& stats, double alpha, const IndexSet& R) {
  return KrEvaluator(stats, alpha)(R);
}

std::int64_t general_interpolation(const DiscoveryTable& d, std::uint32_t R) {
  if (d.empty() || !std::has_single_bit(d.size()) || d.size() > (std::size_t{1} << 20)) {
    throw Error(ErrorCode::invalid_input, "discovery table must cover 2^n subsets with n <= 20");
  }
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (std::uint32_t U = 0; U < d.size(); ++U) {
    const std::int64_t value = d[U] - std::popcount(U & ~R) + d[R & ~U];
    best = std::max(best, value);
  }
  return best;
}

}  // namespace kfdp
