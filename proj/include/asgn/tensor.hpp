#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace asgn {

// Thrown when an operation produces NaN/Inf. The trainer catches this to
// abort with a diagnostic dump instead of silently logging garbage.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s);

// Dense 64-bit tensor. `node` is a handle into the active tape when the
// tensor was produced by a recorded operation (or registered via
// Tape::watch); -1 means constant / untracked. `tape` identifies which
// tape generation the handle belongs to, so stale handles from a consumed
// graph are detectable.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  int node = -1;
  std::uint64_t tape = 0;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (numel(shape) != values.size())
      throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match value count " +
                                  std::to_string(values.size()));
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor zeros(Shape s) {
    std::vector<double> v(numel(s), 0.0);
    return Tensor(std::move(s), std::move(v));
  }
  static Tensor full(Shape s, double fill) {
    std::vector<double> v(numel(s), fill);
    return Tensor(std::move(s), std::move(v));
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }
  bool tracked() const { return node >= 0; }

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double item() const {
    if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape));
    return values[0];
  }

  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
};

// Returns a copy with the graph handle cleared, for reusing values from a
// finished tape as constants.
inline Tensor detach(const Tensor& t) {
  Tensor out;
  out.shape = t.shape;
  out.values = t.values;
  return out;
}

bool all_finite(const std::vector<double>& v);
void require_finite(const Tensor& t, const char* what);

}  // namespace asgn
