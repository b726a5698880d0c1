#pragma once

#include <cstddef>

// Dense kernels backing the tape operations. Every kernel has a serial
// reference implementation; the OpenMP variants split work across rows but
// run the exact same per-row routine, so parallel results are bitwise
// identical to serial ones regardless of thread count. Reductions keep a
// fixed 4-lane accumulation order for the same reason.
namespace asgn::kernels {

// Runtime switch (initialised from ASGN_KERNELS=serial|parallel, default
// parallel). Dispatching entry points fall back to serial for small inputs.
bool parallel_enabled();
void set_parallel(bool on);

namespace serial {
// C[n,m] = A[n,k] * B[m,k]^T   (rows of A dotted with rows of B)
void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
// C[n,m] = A[n,k] * B[k,m]
void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
// C[k,m] += A[n,k]^T * B[n,m]
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
// y[i] = dot(M[i,:], v)
void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d);
// M[i,:] += g[i] * v
void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d);
}  // namespace serial

namespace omp {
void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d);
void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d);
}  // namespace omp

// Dispatching entry points used by the tape.
void matmul_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matmul_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void matvec(const double* m, const double* v, double* y, std::size_t n, std::size_t d);
void rank1_acc(const double* g, const double* v, double* m, std::size_t n, std::size_t d);

// Fixed-order reductions (always serial; deterministic).
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sumsq(const double* x, std::size_t n);

// v[j] += sum_i G[i,j]
void colsum_acc(const double* g, double* v, std::size_t n, std::size_t d);

}  // namespace asgn::kernels
