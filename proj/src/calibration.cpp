#include "kfdp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kfdp/error.hpp"

namespace kfdp {

double nb_upper_tail(int v, int k) {
  if (v < 1) throw Error(ErrorCode::invalid_input, "v must be >= 1");
  if (k <= 0) return 1.0;

  // Terms t_i = C(i+v-1, i) 2^{-i-v} follow t_{i+1} = t_i (i+v) / (2(i+1)).
  // They are carried in log space so 2^{-v} does not underflow for large v.
  const double log_half = -std::log(2.0);
  double log_t = v * log_half;
  double head = 0.0;
  for (int i = 0; i < k; ++i) {
    head += std::exp(log_t);
    log_t += std::log(static_cast<double>(i + v) / (2.0 * (i + 1)));
  }
  if (head <= 0.5) return std::clamp(1.0 - head, 0.0, 1.0);

  // Small tail: sum it directly. Past the mode the ratio is below one and
  // decreasing, so the remainder after term i is at most t_i r / (1 - r).
  double tail = 0.0;
  for (long i = k;; ++i) {
    const double t = std::exp(log_t);
    tail += t;
    const double ratio = static_cast<double>(i + v) / (2.0 * (i + 1));
    log_t += std::log(ratio);
    if (ratio < 1.0 && t * ratio / (1.0 - ratio) < 1e-17) break;
    if (t == 0.0 && ratio < 1.0) break;
  }
  return std::clamp(tail, 0.0, 1.0);
}

int js_v(int k, double alpha, int p) {
  if (k < 1) throw Error(ErrorCode::invalid_input, "k must be >= 1");
  if (p < 1) throw Error(ErrorCode::invalid_input, "p must be >= 1");
  // The tail grows with v, so scan until it first exceeds alpha.
  int best = 0;
  for (int v = 1; v <= p; ++v) {
    if (nb_upper_tail(v, k) <= alpha) {
      best = v;
    } else {
      break;
    }
  }
  if (best == 0) {
    throw Error(ErrorCode::infeasible_k,
                "no v in [1, p] controls the " + std::to_string(k) + "-FWER at the requested level");
  }
  return best;
}

double c_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_input, "alpha must lie in (0, 1)");
  return std::log(1.0 / alpha) / std::log(2.0 - alpha);
}

namespace {

int c_index_value(double c, long j) {
  return static_cast<int>(std::floor(c * (1.0 + j) / (1.0 + c))) + 1;
}

void check_increasing(std::span<const int> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1 || (i > 0 && v[i] <= v[i - 1])) {
      throw Error(ErrorCode::invalid_input, "v must be strictly increasing positive integers");
    }
  }
}

}  // namespace

int k_raw_index(int v, double alpha) {
  const double c = c_alpha(alpha);
  // j - c_j + 1 is nondecreasing in j and grows by at most one per step, so
  // the first j hitting v is the argmin of c_j.
  const long limit = static_cast<long>((v + 2) * (1.0 + c)) + 4;
  for (long j = 1; j <= limit; ++j) {
    if (j - c_index_value(c, j) + 1 == v) return static_cast<int>(j);
  }
  throw Error(ErrorCode::invalid_input, "no index j attains v");
}

std::vector<int> k_raw(std::span<const int> v, double alpha) {
  check_increasing(v);
  const double c = c_alpha(alpha);
  std::vector<int> out;
  out.reserve(v.size());
  for (int vi : v) {
    // Every j with j - c_j + 1 = vi is collected; c_j is nondecreasing in j
    // but the min is taken explicitly.
    const long limit = static_cast<long>((vi + 2) * (1.0 + c)) + 4;
    int best = std::numeric_limits<int>::max();
    for (long j = 1; j <= limit; ++j) {
      const int cj = c_index_value(c, j);
      if (j - cj + 1 == vi) best = std::min(best, cj);
    }
    if (best == std::numeric_limits<int>::max()) throw Error(ErrorCode::invalid_input, "no index j attains v");
    out.push_back(best);
  }
  return out;
}

std::vector<int> k_raw_closed_form(std::span<const int> v, double alpha) {
  check_increasing(v);
  const double c = c_alpha(alpha);
  std::vector<int> out;
  out.reserve(v.size());
  for (int vi : v) out.push_back(static_cast<int>(std::floor(c * vi)) + 1);
  return out;
}

std::vector<int> v_family(const VFamily& family) {
  if (family.cap < 2) throw Error(ErrorCode::invalid_input, "v family cap must be >= 2");
  std::vector<int> out;
  auto push = [&](long value) {
    if (value >= family.cap) return false;
    if (out.empty() || value > out.back()) out.push_back(static_cast<int>(value));
    return true;
  };
  switch (family.kind) {
    case VKind::A:
      for (long i = 1; push(i); ++i) {}
      break;
    case VKind::B:
      push(1);
      for (long i = 2;; ++i) {
        if (!push(i * i / 2)) break;
      }
      break;
    case VKind::C: {
      long a = 1, b = 2;
      push(a);
      while (push(b)) {
        const long next = a + b;
        a = b;
        b = next;
      }
      break;
    }
    case VKind::D:
      for (long value = 1; push(value); value *= 2) {}
      break;
    case VKind::explicit_values:
      check_increasing(family.explicit_values);
      for (int value : family.explicit_values) {
        if (value < family.cap) out.push_back(value);
      }
      break;
  }
  return out;
}

VKind parse_vkind(const std::string& name) {
  if (name == "A" || name == "a") return VKind::A;
  if (name == "B" || name == "b") return VKind::B;
  if (name == "C" || name == "c") return VKind::C;
  if (name == "D" || name == "d") return VKind::D;
  if (name == "explicit") return VKind::explicit_values;
  throw Error(ErrorCode::invalid_input, "unknown v family '" + name + "'");
}

std::string vkind_name(VKind kind) {
  switch (kind) {
    case VKind::A: return "A";
    case VKind::B: return "B";
    case VKind::C: return "C";
    case VKind::D: return "D";
    case VKind::explicit_values: return "explicit";
  }
  return "?";
}

void VKPlan::validate() const {
  if (v.empty() || v.size() != k.size()) throw Error(ErrorCode::invalid_input, "plan needs equal-length v and k");
  check_increasing(v);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] < 1 || (i > 0 && k[i] < k[i - 1])) {
      throw Error(ErrorCode::invalid_input, "plan k must be nondecreasing positive integers");
    }
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_input, "plan alpha must lie in (0, 1)");
  if (horizon_p < 1) throw Error(ErrorCode::invalid_input, "plan horizon must be >= 1");
}

TwoStepTrace two_step_trace(std::span<const int> v, double alpha, double delta, int p,
                            const SignPathPool& pool) {
  if (!(delta > 0.0)) throw Error(ErrorCode::invalid_step_size, "step size delta must be positive");
  check_increasing(v);
  if (v.empty()) throw Error(ErrorCode::invalid_input, "v must be nonempty");
  if (p < 1 || p > pool.path_length()) {
    throw Error(ErrorCode::invalid_input, "horizon p must lie in [1, pool path length]");
  }
  const double c = c_alpha(alpha);
  const long need = required_count(pool.nsim(), 1.0 - alpha);
  const auto counts = kernels::early_stopped_matrix(pool, v, p);
  const double nsim = static_cast<double>(pool.nsim());

  TwoStepTrace trace;
  trace.k_raw = k_raw(v, alpha);
  std::vector<int> jstar;
  jstar.reserve(v.size());
  for (int vi : v) jstar.push_back(k_raw_index(vi, alpha));

  auto step1_k = [&](double cs) {
    std::vector<int> k;
    k.reserve(jstar.size());
    for (int j : jstar) k.push_back(c_index_value(cs, j));
    return k;
  };

  const long raw_hits = kernels::count_joint_below(counts, trace.k_raw);
  trace.prob_raw = raw_hits / nsim;

  // Step 1: largest N with c - N delta still feasible. k only shrinks as N
  // grows, so the scan stops at the first failure.
  trace.k_step1 = trace.k_raw;
  long step1_hits = raw_hits;
  for (int n = 1; c - n * delta > 0.0; ++n) {
    auto k = step1_k(c - n * delta);
    // Small steps often leave every floor unchanged; reuse the last count.
    const long hits = k == trace.k_step1 ? step1_hits : kernels::count_joint_below(counts, k);
    if (hits < need) break;
    trace.step1_n = n;
    trace.k_step1 = std::move(k);
    step1_hits = hits;
  }
  trace.prob_step1 = step1_hits / nsim;

  // Step 2 only lowers k when the start is feasible on this pool.
  if (step1_hits >= need) {
    trace.k_step2 = greedy_lower(counts, trace.k_step1, need, true, &trace.clamp_bound);
  } else {
    trace.k_step2 = trace.k_step1;
  }
  trace.prob_step2 = kernels::count_joint_below(counts, trace.k_step2) / nsim;
  return trace;
}

VKPlan two_step_k(std::span<const int> v, double alpha, double delta, int p, const SignPathPool& pool) {
  const auto trace = two_step_trace(v, alpha, delta, p, pool);
  VKPlan plan;
  plan.v.assign(v.begin(), v.end());
  plan.k = trace.k_step2;
  plan.alpha = alpha;
  plan.horizon_p = p;
  plan.delta = delta;
  plan.clamp_bound = trace.clamp_bound;
  plan.certificate = McCertificate{trace.prob_step2, pool.nsim(), pool.seed()};
  return plan;
}

VKPlan js_plan(int k, double alpha, int p) {
  VKPlan plan;
  const int v = js_v(k, alpha, p);
  plan.v = {v};
  plan.k = {k};
  plan.alpha = alpha;
  plan.horizon_p = p;
  plan.family = "JS";
  plan.exact_probability = 1.0 - nb_upper_tail(v, k);
  return plan;
}

}  // namespace kfdp
