#include "kfdp/sign_pool.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kfdp/error.hpp"

namespace kfdp {

SignPathPool::SignPathPool(long nsim, int path_length, std::uint64_t seed)
    : nsim_(nsim), path_length_(path_length), seed_(seed) {
  if (nsim < 1) throw Error(ErrorCode::invalid_input, "nsim must be >= 1");
  if (path_length < 1 || path_length > 65535) {
    throw Error(ErrorCode::invalid_input, "path length must lie in [1, 65535]");
  }
  words_ = (static_cast<std::size_t>(path_length) + 63) / 64;
  bits_.assign(static_cast<std::size_t>(nsim) * words_, 0);

  const long chunks = (nsim + chunk_size - 1) / chunk_size;
  const std::uint64_t tail_mask =
      (path_length % 64 == 0) ? ~std::uint64_t{0} : ((std::uint64_t{1} << (path_length % 64)) - 1);
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < chunks; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    std::mt19937_64 gen(seq);
    const long end = std::min(nsim, (c + 1) * chunk_size);
    for (long path = c * chunk_size; path < end; ++path) {
      std::uint64_t* row = bits_.data() + static_cast<std::size_t>(path) * words_;
      for (std::size_t w = 0; w < words_; ++w) row[w] = gen();
      row[words_ - 1] &= tail_mask;
    }
  }
}

SignPathPool SignPathPool::from_paths(const std::vector<std::vector<int>>& paths) {
  if (paths.empty()) throw Error(ErrorCode::invalid_input, "no paths supplied");
  SignPathPool pool;
  pool.nsim_ = static_cast<long>(paths.size());
  pool.path_length_ = static_cast<int>(paths.front().size());
  if (pool.path_length_ < 1) throw Error(ErrorCode::invalid_input, "empty path");
  pool.words_ = (static_cast<std::size_t>(pool.path_length_) + 63) / 64;
  pool.bits_.assign(paths.size() * pool.words_, 0);
  for (std::size_t r = 0; r < paths.size(); ++r) {
    if (static_cast<int>(paths[r].size()) != pool.path_length_) {
      throw Error(ErrorCode::invalid_input, "paths must share one length");
    }
    for (int s = 0; s < pool.path_length_; ++s) {
      if (paths[r][s] == 1) {
        pool.bits_[r * pool.words_ + (s >> 6)] |= std::uint64_t{1} << (s & 63);
      } else if (paths[r][s] != -1) {
        throw Error(ErrorCode::invalid_input, "path entries must be +1 or -1");
      }
    }
  }
  return pool;
}

int SignPathPool::early_stopped_count(long path, int horizon, int v) const {
  int negatives = 0;
  int positives = 0;
  for (int s = 0; s < horizon; ++s) {
    if (positive(path, s)) {
      ++positives;
    } else if (++negatives == v) {
      break;
    }
  }
  return positives;
}

void SignPathPool::early_stopped_counts(long path, int horizon, std::span<const int> v,
                                        std::span<std::uint16_t> out) const {
  std::size_t next = 0;
  int negatives = 0;
  int positives = 0;
  for (int s = 0; s < horizon && next < v.size(); ++s) {
    if (positive(path, s)) {
      ++positives;
    } else {
      ++negatives;
      while (next < v.size() && v[next] == negatives) out[next++] = static_cast<std::uint16_t>(positives);
    }
  }
  while (next < v.size()) out[next++] = static_cast<std::uint16_t>(positives);
}

namespace {

void check_matrix_args(const SignPathPool& pool, std::span<const int> v, int horizon) {
  if (horizon < 1 || horizon > pool.path_length()) {
    throw Error(ErrorCode::invalid_input, "horizon exceeds the pool path length");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1 || (i > 0 && v[i] <= v[i - 1])) {
      throw Error(ErrorCode::invalid_input, "v must be strictly increasing positive integers");
    }
  }
}

}  // namespace

namespace kernels {

CountMatrix early_stopped_matrix(const SignPathPool& pool, std::span<const int> v, int horizon) {
  check_matrix_args(pool, v, horizon);
  CountMatrix out(pool.nsim(), static_cast<int>(v.size()));
  const long n = pool.nsim();
#pragma omp parallel for schedule(static)
  for (long r = 0; r < n; ++r) pool.early_stopped_counts(r, horizon, v, out.row(r));
  return out;
}

CountMatrix early_stopped_matrix_serial(const SignPathPool& pool, std::span<const int> v, int horizon) {
  check_matrix_args(pool, v, horizon);
  CountMatrix out(pool.nsim(), static_cast<int>(v.size()));
  for (long r = 0; r < pool.nsim(); ++r) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.row(r)[i] = static_cast<std::uint16_t>(pool.early_stopped_count(r, horizon, v[i]));
    }
  }
  return out;
}

long count_joint_below(const CountMatrix& counts, std::span<const int> limit) {
  const int m = counts.cols();
  const long n = counts.rows();
  long hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (long r = 0; r < n; ++r) {
    auto row = counts.row(r);
    int i = 0;
    while (i < m && row[i] < limit[i]) ++i;
    hits += (i == m);
  }
  return hits;
}

long count_joint_below_serial(const CountMatrix& counts, std::span<const int> limit) {
  long hits = 0;
  for (long r = 0; r < counts.rows(); ++r) {
    bool ok = true;
    for (int i = 0; i < counts.cols(); ++i) ok = ok && (counts.at(r, i) <= limit[i] - 1);
    hits += ok;
  }
  return hits;
}

}  // namespace kernels

double estimate_joint_prob(const SignPathPool& pool, std::span<const int> v, std::span<const int> k,
                           int horizon) {
  if (v.size() != k.size()) throw Error(ErrorCode::invalid_input, "v and k differ in length");
  if (horizon == 0) horizon = pool.path_length();
  const auto counts = kernels::early_stopped_matrix(pool, v, horizon);
  return static_cast<double>(kernels::count_joint_below(counts, k)) / static_cast<double>(pool.nsim());
}

long required_count(long nsim, double level) {
  long c = static_cast<long>(std::ceil(level * static_cast<double>(nsim) - 1e-9));
  return std::clamp(c, 0L, nsim);
}

}  // namespace kfdp
