#pragma once

// Simulated fair +/-1 sequences shared by every Monte-Carlo calibration, and
// the data-parallel kernels that fold over them.
//
// Each kernel comes in two flavours: the OpenMP version used by the library
// and a plain serial version kept as the reference for tests and benchmarks.
// Both must return identical integers.

#include <cstdint>
#include <span>
#include <vector>

namespace kfdp {

class SignPathPool {
 public:
  // Paths are generated in fixed-size chunks, each chunk from its own seeded
  // engine, so the pool does not depend on the thread count.
  SignPathPool(long nsim, int path_length, std::uint64_t seed);

  // Pool made of explicit realized paths (entries +1/-1), for tests.
  static SignPathPool from_paths(const std::vector<std::vector<int>>& paths);

  long nsim() const { return nsim_; }
  int path_length() const { return path_length_; }
  std::uint64_t seed() const { return seed_; }

  // step is 0-based.
  bool positive(long path, int step) const {
    const std::uint64_t word = bits_[static_cast<std::size_t>(path) * words_ + (step >> 6)];
    return (word >> (step & 63)) & 1u;
  }

  // N^horizon(v): number of +1 before the v-th -1, stopping at the horizon.
  int early_stopped_count(long path, int horizon, int v) const;

  // Fills out[i] = N^horizon(v[i]) for increasing v in one pass.
  void early_stopped_counts(long path, int horizon, std::span<const int> v,
                            std::span<std::uint16_t> out) const;

  static constexpr long chunk_size = 1024;

 private:
  SignPathPool() = default;

  long nsim_ = 0;
  int path_length_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Path-major nsim x m table of small non-negative statistics, one row per path.
class CountMatrix {
 public:
  CountMatrix() = default;
  CountMatrix(long rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  long rows() const { return rows_; }
  int cols() const { return cols_; }
  std::span<const std::uint16_t> row(long r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<std::uint16_t> row(long r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::uint16_t at(long r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

 private:
  long rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint16_t> data_;
};

namespace kernels {

// Early-stopped negative binomial counts N^horizon(v_i) for every path.
CountMatrix early_stopped_matrix(const SignPathPool& pool, std::span<const int> v, int horizon);
CountMatrix early_stopped_matrix_serial(const SignPathPool& pool, std::span<const int> v, int horizon);

// Number of rows with row[i] <= limit[i] - 1 for every column i.
long count_joint_below(const CountMatrix& counts, std::span<const int> limit);
long count_joint_below_serial(const CountMatrix& counts, std::span<const int> limit);

}  // namespace kernels

// Fraction of pool paths with N^horizon(v_i) <= k_i - 1 for all i. The
// horizon defaults to the pool's path length.
double estimate_joint_prob(const SignPathPool& pool, std::span<const int> v, std::span<const int> k,
                           int horizon = 0);

// Smallest count c with c / nsim >= level.
long required_count(long nsim, double level);

}  // namespace kfdp
