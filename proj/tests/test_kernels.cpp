#include <doctest.h>

#include <array>
#include <vector>

#include "asgn/kernels.hpp"
#include "asgn/rng.hpp"

using namespace asgn;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("omp kernels are bitwise identical to the serial reference") {
  Rng rng(99);
  const std::vector<std::array<std::size_t, 3>> shapes = {{1, 1, 1}, {3, 5, 7}, {64, 33, 17}, {301, 40, 129}};
  for (auto [n, k, m] : shapes) {
    auto a = randn(n * k, rng);
    auto bt = randn(m * k, rng);
    auto b = randn(k * m, rng);
    auto g = randn(n * m, rng);
    auto v = randn(k, rng);

    std::vector<double> c1(n * m), c2(n * m);
    kernels::serial::matmul_nt(a.data(), bt.data(), c1.data(), n, k, m);
    kernels::omp::matmul_nt(a.data(), bt.data(), c2.data(), n, k, m);
    CHECK(c1 == c2);

    kernels::serial::matmul_nn(a.data(), b.data(), c1.data(), n, k, m);
    kernels::omp::matmul_nn(a.data(), b.data(), c2.data(), n, k, m);
    CHECK(c1 == c2);

    std::vector<double> t1(k * m, 0.5), t2(k * m, 0.5);
    kernels::serial::matmul_tn_acc(a.data(), g.data(), t1.data(), n, k, m);
    kernels::omp::matmul_tn_acc(a.data(), g.data(), t2.data(), n, k, m);
    CHECK(t1 == t2);

    std::vector<double> y1(n), y2(n);
    kernels::serial::matvec(a.data(), v.data(), y1.data(), n, k);
    kernels::omp::matvec(a.data(), v.data(), y2.data(), n, k);
    CHECK(y1 == y2);

    std::vector<double> r1(n * k, 0.25), r2(n * k, 0.25);
    std::vector<double> gv = randn(n, rng);
    kernels::serial::rank1_acc(gv.data(), v.data(), r1.data(), n, k);
    kernels::omp::rank1_acc(gv.data(), v.data(), r2.data(), n, k);
    CHECK(r1 == r2);
  }
}

TEST_CASE("dispatching entry points match the serial reference") {
  Rng rng(3);
  const std::size_t n = 200, k = 96, m = 64;
  auto a = randn(n * k, rng);
  auto b = randn(m * k, rng);
  std::vector<double> c1(n * m), c2(n * m);
  kernels::serial::matmul_nt(a.data(), b.data(), c1.data(), n, k, m);

  kernels::set_parallel(true);
  kernels::matmul_nt(a.data(), b.data(), c2.data(), n, k, m);
  CHECK(c1 == c2);
  kernels::set_parallel(false);
  kernels::matmul_nt(a.data(), b.data(), c2.data(), n, k, m);
  CHECK(c1 == c2);
  kernels::set_parallel(true);
}

TEST_CASE("kernel math sanity") {
  // 2x2 hand-checked products
  const std::vector<double> a = {1, 2, 3, 4};       // [[1,2],[3,4]]
  const std::vector<double> b = {5, 6, 7, 8};       // [[5,6],[7,8]]
  std::vector<double> c(4);
  kernels::matmul_nn(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{19, 22, 43, 50});
  kernels::matmul_nt(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{17, 23, 39, 53});

  CHECK(kernels::sum(a.data(), 4) == 10.0);
  CHECK(kernels::dot(a.data(), b.data(), 4) == 5.0 + 12 + 21 + 32);
  CHECK(kernels::sumsq(a.data(), 4) == 30.0);
}
