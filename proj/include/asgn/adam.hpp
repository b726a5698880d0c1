#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "asgn/tape.hpp"
#include "asgn/tensor.hpp"

namespace asgn::opt {

// Adaptive-moment descent over a fixed parameter group. The caller owns the
// parameter tensors; their addresses must stay stable for the optimizer's
// lifetime.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->size(), 0.0);
      v_[i].assign(params_[i]->size(), 0.0);
    }
  }

  // One descent step from a backward pass that watched all parameters.
  void step(const ad::Gradients& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = *params_[i];
      Tensor g = grads.at(p);
      if (g.size() != p.size()) throw std::logic_error("Adam::step: gradient shape mismatch");
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = g.values[j];
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p.values[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::uint64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace asgn::opt
