#include "asgn/tape.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "asgn/kernels.hpp"

namespace asgn {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void require_finite(const Tensor& t, const char* what) {
  if (!all_finite(t.values)) throw NonFiniteError(std::string(what) + ": non-finite value");
}

}  // namespace asgn

namespace asgn::ad {

namespace {

thread_local std::vector<Tape*> g_tape_stack;
std::atomic<std::uint64_t> g_next_tape_id{1};

// Parent handle of an input tensor relative to the active tape. A handle
// from another (possibly consumed) tape means the tensor enters this graph
// as a constant; only backward rejects stale roots.
int parent_of(const Tensor& t, const char* op) {
  (void)op;
  if (!t.tracked()) return -1;
  Tape* tp = Tape::active();
  if (!tp || t.tape != tp->id()) return -1;
  return t.node;
}

// Tracked on the active tape (as opposed to carrying a stale handle).
bool live(const Tensor& t) { return parent_of(t, "") >= 0; }

Tensor finish(const char* op, Shape shape, std::vector<double> vals, bool any_tracked, Tape::BackFn back) {
  if (!all_finite(vals)) throw NonFiniteError(std::string(op) + ": produced non-finite values");
  Tensor out(std::move(shape), std::move(vals));
  Tape* tp = Tape::active();
  if (tp && any_tracked) {
    out.node = tp->add_node(out.shape, std::move(back));
    out.tape = tp->id();
  }
  return out;
}

void acc_into(double* dst, std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

enum class Bcast { same, rowvec, scalar };

Bcast bcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape == b.shape) return Bcast::same;
  if (b.is_scalar()) return Bcast::scalar;
  if (a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.cols()) return Bcast::rowvec;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                              shape_str(b.shape));
}

// Reduce a full-size gradient onto the broadcast right operand.
void reduce_bcast(std::span<const double> g, Bcast mode, std::size_t rows, std::size_t cols, double sign,
                  double* dst) {
  switch (mode) {
    case Bcast::same:
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += sign * g[i];
      break;
    case Bcast::rowvec:
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dst[j] += sign * g[i * cols + j];
      break;
    case Bcast::scalar: {
      double s = kernels::sum(g.data(), g.size());
      dst[0] += sign * s;
      break;
    }
  }
}

template <class Fwd>
Tensor ew_binary(const char* op, const Tensor& a, const Tensor& b, Fwd f, Tape::BackFn back) {
  std::vector<double> out(a.size());
  Bcast mode = bcast_mode(a, b, op);
  const std::size_t n = a.size();
  switch (mode) {
    case Bcast::same:
      for (std::size_t i = 0; i < n; ++i) out[i] = f(a.values[i], b.values[i]);
      break;
    case Bcast::rowvec: {
      const std::size_t cols = a.cols();
      for (std::size_t i = 0; i < n; ++i) out[i] = f(a.values[i], b.values[i % cols]);
      break;
    }
    case Bcast::scalar:
      for (std::size_t i = 0; i < n; ++i) out[i] = f(a.values[i], b.values[0]);
      break;
  }
  bool tracked = live(a) || live(b);
  return finish(op, a.shape, std::move(out), tracked, std::move(back));
}

}  // namespace

double* Tape::BackState::acc(int node) {
  auto& buf = grads[static_cast<std::size_t>(node)];
  if (buf.empty()) buf.assign(numel(tape.node_shape(node)), 0.0);
  return buf.data();
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) { g_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

int Tape::add_node(Shape shape, BackFn back) {
  nodes_.push_back(Node{std::move(shape), std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::watch(Tensor& t) {
  if (t.tracked() && t.tape == id_) return t.node;
  require_finite(t, "watch");
  t.node = add_node(t.shape, nullptr);
  t.tape = id_;
  return t.node;
}

Gradients Tape::backward(const Tensor& root) const {
  if (!root.tracked() || root.tape != id_)
    throw std::logic_error("backward: root is not on this graph (graph already consumed?)");
  if (!root.is_scalar()) throw std::invalid_argument("backward: root must be a scalar");

  Gradients out;
  out.tape_id_ = id_;
  out.shapes_.reserve(nodes_.size());
  for (const auto& n : nodes_) out.shapes_.push_back(n.shape);
  out.grads_.assign(nodes_.size(), {});
  out.grads_[static_cast<std::size_t>(root.node)] = {1.0};

  BackState state{out.grads_, *this};
  for (int i = root.node; i >= 0; --i) {
    const auto& buf = out.grads_[static_cast<std::size_t>(i)];
    if (buf.empty()) continue;  // node not reached: zero gradient, skip
    const auto& back = nodes_[static_cast<std::size_t>(i)].back;
    if (back) back(std::span<const double>(buf.data(), buf.size()), state);
  }
  return out;
}

Tensor Gradients::at(const Tensor& leaf) const {
  if (!leaf.tracked() || leaf.tape != tape_id_)
    throw std::logic_error("Gradients::at: tensor is not on the graph this backward pass ran on");
  const auto& buf = grads_[static_cast<std::size_t>(leaf.node)];
  const Shape& shape = shapes_[static_cast<std::size_t>(leaf.node)];
  if (buf.empty()) return Tensor::zeros(shape);
  return Tensor(shape, buf);
}

bool Gradients::touched(const Tensor& leaf) const {
  if (!leaf.tracked() || leaf.tape != tape_id_)
    throw std::logic_error("Gradients::touched: tensor is not on this graph");
  return !grads_[static_cast<std::size_t>(leaf.node)].empty();
}

// ---- elementwise binaries ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Bcast mode = bcast_mode(a, b, "add");
  int pa = parent_of(a, "add"), pb = parent_of(b, "add");
  std::size_t rows = a.rank() == 2 ? a.rows() : 1, cols = a.rank() == 2 ? a.cols() : a.size();
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [pa, pb, mode, rows, cols](std::span<const double> g, Tape::BackState& s) {
        if (pa >= 0) acc_into(s.acc(pa), g);
        if (pb >= 0) reduce_bcast(g, mode, rows, cols, 1.0, s.acc(pb));
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Bcast mode = bcast_mode(a, b, "sub");
  int pa = parent_of(a, "sub"), pb = parent_of(b, "sub");
  std::size_t rows = a.rank() == 2 ? a.rows() : 1, cols = a.rank() == 2 ? a.cols() : a.size();
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [pa, pb, mode, rows, cols](std::span<const double> g, Tape::BackState& s) {
        if (pa >= 0) acc_into(s.acc(pa), g);
        if (pb >= 0) reduce_bcast(g, mode, rows, cols, -1.0, s.acc(pb));
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Bcast mode = bcast_mode(a, b, "mul");
  int pa = parent_of(a, "mul"), pb = parent_of(b, "mul");
  std::size_t rows = a.rank() == 2 ? a.rows() : 1, cols = a.rank() == 2 ? a.cols() : a.size();
  std::vector<double> av = a.values, bv = b.values;
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [pa, pb, mode, rows, cols, av, bv](std::span<const double> g, Tape::BackState& s) {
        const std::size_t n = g.size();
        if (pa >= 0) {
          double* ga = s.acc(pa);
          switch (mode) {
            case Bcast::same:
              for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
              break;
            case Bcast::rowvec:
              for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i % cols];
              break;
            case Bcast::scalar:
              for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[0];
              break;
          }
        }
        if (pb >= 0) {
          double* gb = s.acc(pb);
          switch (mode) {
            case Bcast::same:
              for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
              break;
            case Bcast::rowvec:
              for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j] * av[i * cols + j];
              break;
            case Bcast::scalar: {
              double acc = 0.0;
              for (std::size_t i = 0; i < n; ++i) acc += g[i] * av[i];
              gb[0] += acc;
              break;
            }
          }
        }
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Bcast mode = bcast_mode(a, b, "div");
  for (double y : b.values)
    if (y == 0.0) throw std::domain_error("div: division by zero");
  int pa = parent_of(a, "div"), pb = parent_of(b, "div");
  std::size_t rows = a.rank() == 2 ? a.rows() : 1, cols = a.rank() == 2 ? a.cols() : a.size();
  std::vector<double> av = a.values, bv = b.values;
  return ew_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [pa, pb, mode, rows, cols, av, bv](std::span<const double> g, Tape::BackState& s) {
        const std::size_t n = g.size();
        auto bval = [&](std::size_t i) {
          switch (mode) {
            case Bcast::same: return bv[i];
            case Bcast::rowvec: return bv[i % cols];
            default: return bv[0];
          }
        };
        if (pa >= 0) {
          double* ga = s.acc(pa);
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / bval(i);
        }
        if (pb >= 0) {
          double* gb = s.acc(pb);
          for (std::size_t i = 0; i < n; ++i) {
            const double d = bval(i);
            const double contrib = -g[i] * av[i] / (d * d);
            switch (mode) {
              case Bcast::same: gb[i] += contrib; break;
              case Bcast::rowvec: gb[i % cols] += contrib; break;
              case Bcast::scalar: gb[0] += contrib; break;
            }
          }
        }
      });
}

// ---- elementwise unaries ----------------------------------------------------

namespace {

template <class Fwd>
Tensor ew_unary(const char* op, const Tensor& t, Fwd f, std::function<double(double x, double y)> dfdx) {
  int p = parent_of(t, op);
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t.values[i]);
  std::vector<double> xv = t.values;
  std::vector<double> yv = out;
  Tape::BackFn back = nullptr;
  if (dfdx)
    back = [p, xv, yv, dfdx](std::span<const double> g, Tape::BackState& s) {
      if (p < 0) return;
      double* gp = s.acc(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * dfdx(xv[i], yv[i]);
    };
  return finish(op, t.shape, std::move(out), live(t) && dfdx != nullptr, std::move(back));
}

}  // namespace

Tensor neg(const Tensor& t) {
  return ew_unary("neg", t, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor affine(const Tensor& t, double mul_c, double add_c) {
  return ew_unary(
      "affine", t, [mul_c, add_c](double x) { return mul_c * x + add_c; },
      [mul_c](double, double) { return mul_c; });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  return ew_unary(
      "clamp", t, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& t) {
  return ew_unary(
      "relu", t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& t, double slope) {
  return ew_unary(
      "leaky_relu", t, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor leaky_relu_gate(const Tensor& t, double slope) {
  // Piecewise constant in t: contributes no gradient of its own.
  return ew_unary("leaky_relu_gate", t, [slope](double x) { return x > 0.0 ? 1.0 : slope; }, nullptr);
}

Tensor min_zero(const Tensor& t) {
  return ew_unary(
      "min_zero", t, [](double x) { return x < 0.0 ? x : 0.0; },
      [](double x, double) { return x < 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& t) {
  return ew_unary(
      "sigmoid", t,
      [](double x) {
        if (x >= 0.0) {
          const double e = std::exp(-x);
          return 1.0 / (1.0 + e);
        }
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& t) {
  for (double x : t.values)
    if (x <= 0.0) throw std::domain_error("log: non-positive input");
  return ew_unary("log", t, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// ---- matrix ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m);
  kernels::matmul_nn(a.values.data(), b.values.data(), out.data(), n, k, m);
  int pa = parent_of(a, "matmul"), pb = parent_of(b, "matmul");
  std::vector<double> av = a.values, bv = b.values;
  return finish("matmul", {n, m}, std::move(out), live(a) || live(b),
                [pa, pb, av, bv, n, k, m](std::span<const double> g, Tape::BackState& s) {
                  if (pa >= 0) {
                    // dA[n,k] += G[n,m] * B[k,m]^T
                    std::vector<double> tmp(n * k);
                    kernels::matmul_nt(g.data(), bv.data(), tmp.data(), n, m, k);
                    acc_into(s.acc(pa), std::span<const double>(tmp.data(), tmp.size()));
                  }
                  if (pb >= 0) {
                    // dB[k,m] += A[n,k]^T * G[n,m]
                    kernels::matmul_tn_acc(av.data(), g.data(), s.acc(pb), n, k, m);
                  }
                });
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.shape[0])
    throw std::invalid_argument("matvec: incompatible shapes " + shape_str(m.shape) + " x " +
                                shape_str(v.shape));
  const std::size_t n = m.rows(), d = m.cols();
  std::vector<double> out(n);
  kernels::matvec(m.values.data(), v.values.data(), out.data(), n, d);
  int pm = parent_of(m, "matvec"), pv = parent_of(v, "matvec");
  std::vector<double> mv = m.values, vv = v.values;
  return finish("matvec", {n}, std::move(out), live(m) || live(v),
                [pm, pv, mv, vv, n, d](std::span<const double> g, Tape::BackState& s) {
                  if (pm >= 0) kernels::rank1_acc(g.data(), vv.data(), s.acc(pm), n, d);
                  if (pv >= 0) {
                    // dv[d] += M^T g : tn with single output column
                    kernels::matmul_tn_acc(mv.data(), g.data(), s.acc(pv), n, d, 1);
                  }
                });
}

namespace {

Tensor linear_impl(const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.cols())
    throw std::invalid_argument("linear: incompatible shapes x=" + shape_str(x.shape) +
                                " w=" + shape_str(w.shape));
  const std::size_t n = x.rows(), in = x.cols(), out_dim = w.rows();
  if (bias && (bias->rank() != 1 || bias->shape[0] != out_dim))
    throw std::invalid_argument("linear: bias shape mismatch");
  std::vector<double> out(n * out_dim);
  kernels::matmul_nt(x.values.data(), w.values.data(), out.data(), n, in, out_dim);
  if (bias) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_dim; ++j) out[i * out_dim + j] += bias->values[j];
  }
  int px = parent_of(x, "linear"), pw = parent_of(w, "linear");
  int pb = bias ? parent_of(*bias, "linear") : -1;
  std::vector<double> xv = x.values, wv = w.values;
  bool tracked = live(x) || live(w) || (bias && live(*bias));
  return finish("linear", {n, out_dim}, std::move(out), tracked,
                [px, pw, pb, xv, wv, n, in, out_dim](std::span<const double> g, Tape::BackState& s) {
                  if (px >= 0) {
                    // dX[n,in] += G[n,out] * W[out,in]
                    std::vector<double> tmp(n * in);
                    kernels::matmul_nn(g.data(), wv.data(), tmp.data(), n, out_dim, in);
                    acc_into(s.acc(px), std::span<const double>(tmp.data(), tmp.size()));
                  }
                  if (pw >= 0) {
                    // dW[out,in] += G[n,out]^T * X[n,in]
                    kernels::matmul_tn_acc(g.data(), xv.data(), s.acc(pw), n, out_dim, in);
                  }
                  if (pb >= 0) kernels::colsum_acc(g.data(), s.acc(pb), n, out_dim);
                });
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return linear_impl(x, w, &b); }
Tensor linear(const Tensor& x, const Tensor& w) { return linear_impl(x, w, nullptr); }

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& t) {
  int p = parent_of(t, "sum");
  double s = kernels::sum(t.values.data(), t.size());
  std::size_t n = t.size();
  return finish("sum", {}, {s}, live(t), [p, n](std::span<const double> g, Tape::BackState& st) {
    if (p < 0) return;
    double* gp = st.acc(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += g[0];
  });
}

Tensor mean_batch(const Tensor& t) {
  if (t.rank() == 0 || t.rows() == 0) throw std::invalid_argument("mean_batch: empty batch axis");
  int p = parent_of(t, "mean_batch");
  const std::size_t n = t.rows();
  const double inv = 1.0 / static_cast<double>(n);
  if (t.rank() == 1) {
    double s = kernels::sum(t.values.data(), n) * inv;
    return finish("mean_batch", {}, {s}, live(t), [p, n, inv](std::span<const double> g, Tape::BackState& st) {
      if (p < 0) return;
      double* gp = st.acc(p);
      for (std::size_t i = 0; i < n; ++i) gp[i] += g[0] * inv;
    });
  }
  if (t.rank() != 2) throw std::invalid_argument("mean_batch: rank must be 1 or 2");
  const std::size_t d = t.cols();
  std::vector<double> out(d, 0.0);
  kernels::colsum_acc(t.values.data(), out.data(), n, d);
  for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
  return finish("mean_batch", {d}, std::move(out), live(t),
                [p, n, d, inv](std::span<const double> g, Tape::BackState& st) {
                  if (p < 0) return;
                  double* gp = st.acc(p);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += g[j] * inv;
                });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size())
    throw std::invalid_argument("dot: incompatible shapes " + shape_str(a.shape) + " . " + shape_str(b.shape));
  int pa = parent_of(a, "dot"), pb = parent_of(b, "dot");
  double v = kernels::dot(a.values.data(), b.values.data(), a.size());
  std::vector<double> av = a.values, bv = b.values;
  return finish("dot", {}, {v}, live(a) || live(b),
                [pa, pb, av, bv](std::span<const double> g, Tape::BackState& s) {
                  if (pa >= 0) {
                    double* ga = s.acc(pa);
                    for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g[0] * bv[i];
                  }
                  if (pb >= 0) {
                    double* gb = s.acc(pb);
                    for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
                  }
                });
}

Tensor norm(const Tensor& t) {
  int p = parent_of(t, "norm");
  double v = std::sqrt(kernels::sumsq(t.values.data(), t.size()));
  std::vector<double> xv = t.values;
  return finish("norm", {}, {v}, live(t), [p, xv, v](std::span<const double> g, Tape::BackState& s) {
    if (p < 0 || v == 0.0) return;  // subgradient 0 at the origin
    double* gp = s.acc(p);
    for (std::size_t i = 0; i < xv.size(); ++i) gp[i] += g[0] * xv[i] / v;
  });
}

Tensor row_norm(const Tensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("row_norm: rank-2 input required");
  int p = parent_of(t, "row_norm");
  const std::size_t n = t.rows(), d = t.cols();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(kernels::sumsq(t.values.data() + i * d, d));
  std::vector<double> xv = t.values, yv = out;
  return finish("row_norm", {n}, std::move(out), live(t),
                [p, xv, yv, n, d](std::span<const double> g, Tape::BackState& s) {
                  if (p < 0) return;
                  double* gp = s.acc(p);
                  for (std::size_t i = 0; i < n; ++i) {
                    if (yv[i] == 0.0) continue;
                    const double w = g[i] / yv[i];
                    for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += w * xv[i * d + j];
                  }
                });
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 1) throw std::invalid_argument("l2_normalize: rank-1 input required");
  const double nrm = std::sqrt(kernels::sumsq(v.values.data(), v.size()));
  if (nrm == 0.0) throw std::domain_error("l2_normalize: zero vector");
  int p = parent_of(v, "l2_normalize");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v.values[i] / nrm;
  std::vector<double> yv = out;
  return finish("l2_normalize", v.shape, std::move(out), live(v),
                [p, yv, nrm](std::span<const double> g, Tape::BackState& s) {
                  if (p < 0) return;
                  double* gp = s.acc(p);
                  double gy = 0.0;
                  for (std::size_t i = 0; i < yv.size(); ++i) gy += g[i] * yv[i];
                  for (std::size_t i = 0; i < yv.size(); ++i) gp[i] += (g[i] - yv[i] * gy) / nrm;
                });
}

namespace {

Tensor lerp_impl(const Tensor& a, const Tensor& b, std::vector<double> t, bool per_row) {
  if (a.shape != b.shape) throw std::invalid_argument("lerp: shape mismatch");
  if (per_row) {
    if (a.rank() != 2 || t.size() != a.rows())
      throw std::invalid_argument("lerp: per-row factor count must match rows");
  }
  const std::size_t n = a.size();
  const std::size_t cols = per_row ? a.cols() : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = per_row ? t[i / cols] : t[0];
    out[i] = a.values[i] + ti * (b.values[i] - a.values[i]);
  }
  int pa = parent_of(a, "lerp"), pb = parent_of(b, "lerp");
  return finish("lerp", a.shape, std::move(out), live(a) || live(b),
                [pa, pb, t, per_row, cols](std::span<const double> g, Tape::BackState& s) {
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const double ti = per_row ? t[i / cols] : t[0];
                    if (pa >= 0) s.acc(pa)[i] += g[i] * (1.0 - ti);
                    if (pb >= 0) s.acc(pb)[i] += g[i] * ti;
                  }
                });
}

}  // namespace

Tensor lerp(const Tensor& a, const Tensor& b, const std::vector<double>& t) {
  return lerp_impl(a, b, t, true);
}
Tensor lerp(const Tensor& a, const Tensor& b, double t) { return lerp_impl(a, b, {t}, false); }

Tensor row(const Tensor& t, std::size_t i) {
  if (t.rank() != 2 || i >= t.rows()) throw std::invalid_argument("row: index out of range");
  const std::size_t d = t.cols();
  std::vector<double> out(t.values.begin() + static_cast<std::ptrdiff_t>(i * d),
                          t.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  int p = parent_of(t, "row");
  return finish("row", {d}, std::move(out), live(t),
                [p, i, d](std::span<const double> g, Tape::BackState& s) {
                  if (p < 0) return;
                  double* gp = s.acc(p);
                  for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += g[j];
                });
}

Tensor tile_rows(const Tensor& v, std::size_t n) {
  if (v.rank() != 1 || n == 0) throw std::invalid_argument("tile_rows: rank-1 input and n > 0 required");
  const std::size_t d = v.size();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * d, v.values.data(), d * sizeof(double));
  int p = parent_of(v, "tile_rows");
  return finish("tile_rows", {n, d}, std::move(out), live(v),
                [p, n, d](std::span<const double> g, Tape::BackState& s) {
                  if (p < 0) return;
                  kernels::colsum_acc(g.data(), s.acc(p), n, d);
                });
}

Tensor stop_gradient(const Tensor& t) { return detach(t); }

// ---- finite differences --------------------------------------------------------

FdReport finite_difference_check(const std::vector<Tensor*>& params, const BuildFn& build, double step,
                                 double tolerance) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    for (Tensor* p : params) tape.watch(*p);
    Tensor root = build(tape);
    Gradients g = tape.backward(root);
    for (Tensor* p : params) analytic.push_back(g.at(*p));
  }

  auto value_at = [&]() {
    Tape tape;
    for (Tensor* p : params) tape.watch(*p);
    return build(tape).item();
  };

  FdReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + step;
      const double f_plus = value_at();
      p.values[i] = saved - step;
      const double f_minus = value_at();
      p.values[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double a = analytic[pi].values[i];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.checks;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace asgn::ad
