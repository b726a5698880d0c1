// Times the serial reference kernels against the OpenMP variants on the
// shapes the training loop actually hits, and verifies the two produce
// bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "asgn/kernels.hpp"
#include "asgn/rng.hpp"

using namespace asgn;

namespace {

using Clock = std::chrono::steady_clock;

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
}

struct Case {
  std::string name;
  std::size_t n, k, m;
};

}  // namespace

int main() {
  Rng rng(7);
  const std::vector<Case> cases = {
      {"gen in  [256x10 . 10x128^T]", 256, 10, 128},   {"hidden  [256x128 . 128x128^T]", 256, 128, 128},
      {"gen out [256x128 . 128x2^T]", 256, 128, 2},    {"diag    [10000x128 . 128x128^T]", 10000, 128, 128},
      {"grad tn [256x128^T . 256x128]", 256, 128, 128},
  };

  std::printf("%-34s %12s %12s %8s %10s  %s\n", "kernel", "serial (us)", "omp (us)", "speedup",
              "GFLOP/s(omp)", "bitwise");
  for (const auto& c : cases) {
    std::vector<double> a(c.n * c.k), b(c.m * c.k), out1(c.n * c.m), out2(c.n * c.m);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const bool tn = c.name.rfind("grad tn", 0) == 0;
    std::vector<double> g(c.n * c.m);
    for (auto& x : g) x = rng.normal();

    double ts, tp;
    bool same;
    if (!tn) {
      ts = time_of([&] { kernels::serial::matmul_nt(a.data(), b.data(), out1.data(), c.n, c.k, c.m); }, 20);
      tp = time_of([&] { kernels::omp::matmul_nt(a.data(), b.data(), out2.data(), c.n, c.k, c.m); }, 20);
      same = out1 == out2;
    } else {
      std::vector<double> acc1(c.k * c.m, 0.0), acc2(c.k * c.m, 0.0);
      ts = time_of([&] { kernels::serial::matmul_tn_acc(a.data(), g.data(), acc1.data(), c.n, c.k, c.m); },
                   20);
      tp = time_of([&] { kernels::omp::matmul_tn_acc(a.data(), g.data(), acc2.data(), c.n, c.k, c.m); }, 20);
      same = acc1 == acc2;
    }
    const double flops = 2.0 * static_cast<double>(c.n) * c.k * c.m;
    std::printf("%-34s %12.1f %12.1f %8.2f %10.2f  %s\n", c.name.c_str(), ts * 1e6, tp * 1e6, ts / tp,
                flops / tp / 1e9, same ? "yes" : "NO");
  }

  // elementwise + reduction scale check
  {
    const std::size_t n = 1 << 20;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    const double t = time_of([&] { (void)kernels::sum(x.data(), n); }, 50);
    std::printf("%-34s %12.1f us  (%.2f GB/s)\n", "reduce sum [1M]", t * 1e6, n * 8.0 / t / 1e9);
  }
  return 0;
}
