// Serial reference kernels versus their OpenMP versions on a p=1000, nsim=100000
// workload. The OpenMP kernels are timed on one thread and on all threads,
// so the single-pass gain and the threading gain show up separately. Exits
// nonzero if any result differs from the reference.
//
//   kernel_bench [nsim] [p] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "kfdp/calibration.hpp"
#include "kfdp/sign_pool.hpp"

using namespace kfdp;

namespace {

template <class F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const long nsim = argc > 1 ? std::atol(argv[1]) : 100000;
  const int p = argc > 2 ? std::atoi(argv[2]) : 1000;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 3;

  const SignPathPool pool(nsim, p, 7);
  const auto v = v_family({VKind::B, std::min(150, p), {}});
  const auto k = k_raw(v, 0.05);
  std::printf("nsim=%ld p=%d m=%zu threads=%d\n", nsim, p, v.size(), omp_get_max_threads());

  const int threads = omp_get_max_threads();
  CountMatrix serial, one, many;
  const double matrix_serial = best_ms(repeats, [&] { serial = kernels::early_stopped_matrix_serial(pool, v, p); });
  omp_set_num_threads(1);
  const double matrix_one = best_ms(repeats, [&] { one = kernels::early_stopped_matrix(pool, v, p); });
  omp_set_num_threads(threads);
  const double matrix_many = best_ms(repeats, [&] { many = kernels::early_stopped_matrix(pool, v, p); });

  bool same = true;
  for (const auto* m : {&one, &many}) {
    same = same && m->rows() == serial.rows() && m->cols() == serial.cols();
    for (long r = 0; same && r < serial.rows(); ++r) {
      for (int c = 0; c < serial.cols(); ++c) same = same && serial.at(r, c) == m->at(r, c);
    }
  }

  long hits_serial = 0, hits_one = 0, hits_many = 0;
  const double count_serial = best_ms(repeats * 10, [&] { hits_serial = kernels::count_joint_below_serial(serial, k); });
  omp_set_num_threads(1);
  const double count_one = best_ms(repeats * 10, [&] { hits_one = kernels::count_joint_below(serial, k); });
  omp_set_num_threads(threads);
  const double count_many = best_ms(repeats * 10, [&] { hits_many = kernels::count_joint_below(serial, k); });
  same = same && hits_serial == hits_one && hits_serial == hits_many;

  std::printf("%-22s %12s %12s %12s %9s\n", "kernel", "serial ms", "omp x1 ms", "omp xN ms", "xN/ser");
  std::printf("%-22s %12.2f %12.2f %12.2f %9.2f\n", "early_stopped_matrix", matrix_serial, matrix_one, matrix_many,
              matrix_serial / matrix_many);
  std::printf("%-22s %12.3f %12.3f %12.3f %9.2f\n", "count_joint_below", count_serial, count_one, count_many,
              count_serial / count_many);
  std::printf("joint probability at k_raw: %.4f\n", static_cast<double>(hits_many) / nsim);
  std::printf("results %s\n", same ? "identical" : "DIFFER");
  return same ? 0 : 1;
}
