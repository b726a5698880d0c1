#include "asgn/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace asgn::kernels {

namespace {

bool read_env_default() {
  const char* v = std::getenv("ASGN_KERNELS");
  if (v && std::strcmp(v, "serial") == 0) return false;
  return true;
}

bool g_parallel = read_env_default();

// Work threshold below which the dispatchers stay serial.
constexpr std::size_t kParThreshold = 1u << 14;

// Single definition of each per-row routine; both the serial and the OpenMP
// variants call these, which is what makes them bitwise interchangeable.

inline double dot_row(const double* x, const double* y, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return ((a0 + a1) + (a2 + a3)) + tail;
}

inline void row_nt(const double* arow, const double* b, double* crow, std::size_t k, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) crow[j] = dot_row(arow, b + j * k, k);
}

inline void row_nn(const double* arow, const double* b, double* crow, std::size_t k, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) crow[j] = 0.0;
  for (std::size_t l = 0; l < k; ++l) {
    const double a = arow[l];
    const double* brow = b + l * m;
    for (std::size_t j = 0; j < m; ++j) crow[j] += a * brow[j];
  }
}

// One row of C[k,m] += A[:,kk]^T * B; iterates samples in fixed order.
inline void row_tn_acc(const double* a, const double* b, double* crow, std::size_t kk, std::size_t n,
                       std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w = a[i * k + kk];
    const double* brow = b + i * m;
    for (std::size_t j = 0; j < m; ++j) crow[j] += w * brow[j];
  }
}

inline void row_rank1_acc(const double* g, const double* v, double* mrow, std::size_t i, std::size_t d) {
  const double gi = g[i];
  for (std::size_t j = 0; j < d; ++j) mrow[j] += gi * v[j];
}

}  // namespace

bool parallel_enabled() { return g_parallel; }
void set_parallel(bool on) { g_parallel = on; }

namespace serial {

void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) row_nt(a + i * k, b, c + i * m, k, m);
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) row_nn(a + i * k, b, c + i * m, k, m);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t kk = 0; kk < k; ++kk) row_tn_acc(a, b, c + kk * m, kk, n, k, m);
}

void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) y[i] = dot_row(m + i * d, v, d);
}

void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) row_rank1_acc(g, v, m + i * d, i, d);
}

}  // namespace serial

namespace omp {

void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) row_nt(a + i * k, b, c + i * m, k, m);
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) row_nn(a + i * k, b, c + i * m, k, m);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (std::size_t kk = 0; kk < k; ++kk) row_tn_acc(a, b, c + kk * m, kk, n, k, m);
}

void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] = dot_row(m + i * d, v, d);
}

void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) row_rank1_acc(g, v, m + i * d, i, d);
}

}  // namespace omp

void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  if (g_parallel && n * k * m >= kParThreshold)
    omp::matmul_nt(a, b, c, n, k, m);
  else
    serial::matmul_nt(a, b, c, n, k, m);
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  if (g_parallel && n * k * m >= kParThreshold)
    omp::matmul_nn(a, b, c, n, k, m);
  else
    serial::matmul_nn(a, b, c, n, k, m);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  if (g_parallel && n * k * m >= kParThreshold)
    omp::matmul_tn_acc(a, b, c, n, k, m);
  else
    serial::matmul_tn_acc(a, b, c, n, k, m);
}

void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d) {
  if (g_parallel && n * d >= kParThreshold)
    omp::matvec(m, v, y, n, d);
  else
    serial::matvec(m, v, y, n, d);
}

void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d) {
  if (g_parallel && n * d >= kParThreshold)
    omp::rank1_acc(g, v, m, n, d);
  else
    serial::rank1_acc(g, v, m, n, d);
}

double sum(const double* x, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i];
    a1 += x[i + 1];
    a2 += x[i + 2];
    a3 += x[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return ((a0 + a1) + (a2 + a3)) + tail;
}

double dot(const double* x, const double* y, std::size_t n) { return dot_row(x, y, n); }

double sumsq(const double* x, std::size_t n) { return dot_row(x, x, n); }

void colsum_acc(const double* g, double* v, std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = g + i * d;
    for (std::size_t j = 0; j < d; ++j) v[j] += grow[j];
  }
}

}  // namespace asgn::kernels
