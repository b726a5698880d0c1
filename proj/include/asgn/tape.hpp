#pragma once

#include <functional>
#include <span>
#include <vector>

#include "asgn/tensor.hpp"

namespace asgn::ad {

class Tape;

// Result of a backward pass: one gradient buffer per node, empty meaning the
// node was never reached (its gradient is zero). Handles are validated
// against the tape generation they came from.
class Gradients {
 public:
  Tensor at(const Tensor& leaf) const;
  bool touched(const Tensor& leaf) const;

 private:
  friend class Tape;
  std::uint64_t tape_id_ = 0;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> grads_;
};

// Records primitive operations as they execute; rebuilt every iteration
// (tape style). Construction pushes the tape as the active one for the
// current thread, destruction pops it. Graph construction and the backward
// sweep are single-threaded; individual kernels may parallelise internally.
class Tape {
 public:
  struct BackState {
    std::vector<std::vector<double>>& grads;
    const Tape& tape;
    // Accumulation buffer for a node, zero-filled on first touch.
    double* acc(int node);
  };
  using BackFn = std::function<void(std::span<const double>, BackState&)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf (parameter or data) on this tape. Idempotent per tape.
  int watch(Tensor& t);

  // Reverse sweep from a scalar root; every node is visited at most once.
  // May be called repeatedly while the tape is alive.
  Gradients backward(const Tensor& root) const;

  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return nodes_.size(); }

  static Tape* active();

  int add_node(Shape shape, BackFn back);
  const Shape& node_shape(int node) const { return nodes_[static_cast<std::size_t>(node)].shape; }

 private:
  struct Node {
    Shape shape;
    BackFn back;  // null for leaves
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
};

// ---- Primitive operations -------------------------------------------------
//
// All operations evaluate eagerly in 64-bit arithmetic, raise
// std::invalid_argument on shape mismatch and NonFiniteError when an output
// contains NaN/Inf, and record themselves on the active tape whenever one
// exists and at least one input is tracked.
//
// Elementwise binaries accept equal shapes, a rank-1 right operand matching
// the columns of a rank-2 left operand (row broadcast), or a scalar right
// operand.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& t);
// mul_c * t + add_c, elementwise with constants.
Tensor affine(const Tensor& t, double mul_c, double add_c);
inline Tensor scale(const Tensor& t, double c) { return affine(t, c, 0.0); }
Tensor clamp(const Tensor& t, double lo, double hi);

Tensor relu(const Tensor& t);
Tensor leaky_relu(const Tensor& t, double slope);
// Derivative factor of leaky_relu (x > 0 ? 1 : slope) as a piecewise-constant
// op: identical values to the analytic derivative, zero gradient of its own.
// Used by the input-gradient sweep of the gradient penalty.
Tensor leaky_relu_gate(const Tensor& t, double slope);
// min(0, x); subgradient convention 0 at the kink.
Tensor min_zero(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor log(const Tensor& t);

Tensor matmul(const Tensor& a, const Tensor& b);        // [n,k] x [k,m]
Tensor matvec(const Tensor& m, const Tensor& v);        // [n,d] x [d] -> [n]
// x[n,in] * w[out,in]^T + b[out]; pass b with size 0 shape {0}? use overloads:
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w);

Tensor sum(const Tensor& t);        // all elements -> scalar
Tensor mean_batch(const Tensor& t); // mean over axis 0: [n,d]->[d], [n]->scalar
Tensor dot(const Tensor& a, const Tensor& b);           // rank-1 pair -> scalar
Tensor norm(const Tensor& t);                           // flat L2 -> scalar
Tensor row_norm(const Tensor& t);                       // [n,d] -> [n]
Tensor l2_normalize(const Tensor& v);                   // rank-1, error on zero

// a + t*(b - a); t is a plain constant, either one value for the whole
// tensor or one value per row of rank-2 inputs.
Tensor lerp(const Tensor& a, const Tensor& b, const std::vector<double>& t);
Tensor lerp(const Tensor& a, const Tensor& b, double t);

// Row i of a rank-2 tensor as a rank-1 tensor; backward scatters into the row.
Tensor row(const Tensor& t, std::size_t i);

// [n, d] matrix whose every row is v; backward column-sums into v.
Tensor tile_rows(const Tensor& v, std::size_t n);

// Forward identity, zero partial derivatives: result is an untracked constant.
Tensor stop_gradient(const Tensor& t);

// ---- Gradient checking ----------------------------------------------------

struct FdReport {
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checks = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares reverse-mode gradients of a scalar-valued build function against
// central finite differences over every element of `params`. The build
// function must construct the scalar from the given (already watched)
// parameter tensors on the supplied tape.
using BuildFn = std::function<Tensor(Tape&)>;
FdReport finite_difference_check(const std::vector<Tensor*>& params, const BuildFn& build, double step,
                                 double tolerance);

}  // namespace asgn::ad
