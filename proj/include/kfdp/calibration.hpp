#pragma once

// (v, k) plans for joint k-FWER control: exact negative binomial tails for the
// single-k case, the closed-form k_raw vector, the four v families and the
// two-step Monte-Carlo refinement of k over a shared sign-path pool.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfdp/sign_pool.hpp"

namespace kfdp {

// P(NB(v, 1/2) >= k): probability of at least k successes before the v-th
// failure with fair trials.
double nb_upper_tail(int v, int k);

// Largest v in [1, p] with nb_upper_tail(v, k) <= alpha. Throws InfeasibleK
// when even v = 1 fails.
int js_v(int k, double alpha, int p);

// c(alpha) = log(1/alpha) / log(2 - alpha).
double c_alpha(double alpha);

// k_raw via min_j { c_j : j - c_j + 1 = v_i }.
std::vector<int> k_raw(std::span<const int> v, double alpha);
// k_raw via floor(c(alpha) * v_i) + 1.
std::vector<int> k_raw_closed_form(std::span<const int> v, double alpha);
// argmin_j { c_j : j - c_j + 1 = v }, the index reused by the first refinement step.
int k_raw_index(int v, double alpha);

enum class VKind { A, B, C, D, explicit_values };

struct VFamily {
  VKind kind = VKind::B;
  int cap = 2;  // exclusive upper bound on v_i
  std::vector<int> explicit_values;
};

std::vector<int> v_family(const VFamily& family);
VKind parse_vkind(const std::string& name);
std::string vkind_name(VKind kind);

struct McCertificate {
  double probability = 0.0;
  long nsim = 0;
  std::uint64_t seed = 0;
};

struct VKPlan {
  std::vector<int> v;
  std::vector<int> k;
  double alpha = 0.05;
  int horizon_p = 0;
  std::string family;
  // Monte-Carlo certificate; absent means the plan is exact or user supplied.
  std::optional<McCertificate> certificate;
  std::optional<double> exact_probability;
  double delta = 0.0;
  bool clamp_bound = false;  // step-2 monotonicity clamp changed some k_i

  void validate() const;
};

struct TwoStepTrace {
  std::vector<int> k_raw;
  std::vector<int> k_step1;
  std::vector<int> k_step2;
  double prob_raw = 0.0;
  double prob_step1 = 0.0;
  double prob_step2 = 0.0;
  int step1_n = 0;
  bool clamp_bound = false;
};

// Step 1 shrinks c(alpha) by multiples of delta, step 2 greedily lowers each
// k_i in increasing i. Feasibility is judged by the point estimate on the pool
// being >= 1 - alpha. The horizon p must not exceed the pool path length.
TwoStepTrace two_step_trace(std::span<const int> v, double alpha, double delta, int p,
                            const SignPathPool& pool);
VKPlan two_step_k(std::span<const int> v, double alpha, double delta, int p, const SignPathPool& pool);

// Greedy lowering of a feasible starting vector (step 2 only) over a
// precomputed statistic table: for i = 1..m, the smallest limit_i <= start_i
// keeping #{rows : row_j <= limit_j - 1 for all j} >= need. With
// clamp_nondecreasing, limit_i never drops below limit_{i-1}.
template <class Matrix>
std::vector<int> greedy_lower(const Matrix& counts, std::vector<int> start, long need,
                              bool clamp_nondecreasing, bool* clamp_bound = nullptr);

// Single-component plan (k, v_JS(k)) with its exact certificate.
VKPlan js_plan(int k, double alpha, int p);

template <class Matrix>
std::vector<int> greedy_lower(const Matrix& counts, std::vector<int> start, long need,
                              bool clamp_nondecreasing, bool* clamp_bound) {
  const int m = counts.cols();
  const long n = counts.rows();
  std::vector<int>& k = start;

  // violations[r] = number of components with value >= limit on row r.
  std::vector<int> violations(n, 0);
  for (long r = 0; r < n; ++r) {
    for (int i = 0; i < m; ++i) violations[r] += static_cast<long>(counts.at(r, i)) >= k[i];
  }

  std::vector<long> hist;
  for (int i = 0; i < m; ++i) {
    // Histogram of column i over rows that satisfy every other component.
    hist.assign(static_cast<std::size_t>(std::max(k[i], 1)) + 1, 0);
    for (long r = 0; r < n; ++r) {
      const long value = counts.at(r, i);
      const bool own = value >= k[i];
      if (violations[r] - own == 0 && !own) ++hist[value];
    }
    const int floor_k = (clamp_nondecreasing && i > 0) ? k[i - 1] : 1;
    int chosen = k[i];
    long covered = 0;
    for (int cand = 1; cand <= k[i]; ++cand) {
      covered += hist[cand - 1];
      if (covered >= need) {
        chosen = cand;
        break;
      }
    }
    if (chosen < floor_k) {
      chosen = floor_k;
      if (clamp_bound) *clamp_bound = true;
    }
    if (chosen != k[i]) {
      for (long r = 0; r < n; ++r) {
        const long value = counts.at(r, i);
        violations[r] += static_cast<int>(value >= chosen) - static_cast<int>(value >= k[i]);
      }
      k[i] = chosen;
    }
  }
  return k;
}

}  // namespace kfdp
