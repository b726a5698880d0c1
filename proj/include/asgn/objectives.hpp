#pragma once

#include <span>
#include <string>
#include <vector>

#include "asgn/nets.hpp"
#include "asgn/rng.hpp"
#include "asgn/tensor.hpp"

namespace asgn::obj {

// The four supported adversarial objectives. Each kind binds one
// discriminator maximization V, one generator minimization J and one
// weighting r_J (the derivative of J's outer function, used to reweight the
// measures the direction is trained against):
//
//   wasserstein : V = E_r[f] - E_f[f]                      J = -E[f]              r = 1
//   hinge       : V = E_r[min(0,-1+f)] + E_f[min(0,-1-f)]  J = -E[f]              r = 1
//   saturating  : V = E_r[log s(f)] + E_f[log s(-f)]       J = -E[log s(f)]       r = 1 - s(f)
//   non-sat.    : V = E_r[log s(f)] + E_f[log s(-f)]       J =  E[log s(1-f)]     r = s(f)
//
// s is the logistic sigmoid, clamped to [eps, 1-eps] before logs. Note the
// non-saturating pair: differentiating the J above would give s(f-1) rather
// than s(f); the weighting here is intentionally kept as stated alongside
// that J (the J/weighting pair is shipped as specified upstream; see
// README). The saturating pair is self-consistent and is covered by an
// exact derivative test.
enum class LossKind { wasserstein, hinge, saturating, non_saturating };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

inline constexpr double kSigmoidClampEps = 1e-7;

// Monte-Carlo J over a batch of generated-sample scores.
Tensor generator_loss(LossKind kind, const Tensor& fake_scores);

// r_J applied elementwise to scores; strictly positive. Plain-value variant
// for diagnostics paths that never differentiate.
Tensor weighting(LossKind kind, const Tensor& scores);
std::vector<double> weighting_values(LossKind kind, std::span<const double> scores);

// V to be maximized (the trainer negates it for descent).
Tensor discriminator_loss_gan(LossKind kind, const Tensor& real_scores, const Tensor& fake_scores);

// Scalar objective with its component breakdown for logging. The invariant
// total = l_h + l_omega - gp holds to 1e-12 (gp is the penalty magnitude and
// enters the maximization negatively).
struct ObjectiveValue {
  Tensor total;
  Tensor l_h;
  Tensor l_omega;
  Tensor gp;
};

struct ScoredBatch {
  Tensor features;  // [n, D], tracked
  Tensor scores;    // [n], tracked
};

// The modified maximization problem: L^h evaluates V with the direction
// frozen (gradients reach h only), L^omega is the weighted feature-mean
// difference with the features and the self-normalized weights frozen
// (gradients reach omega only).
ObjectiveValue discriminator_loss_asgn(LossKind kind, const ScoredBatch& real, const ScoredBatch& fake,
                                       const Tensor& omega);

// Plain V wrapped in the same component structure (l_omega = 0).
ObjectiveValue objective_gan(LossKind kind, const ScoredBatch& real, const ScoredBatch& fake);

struct ClassBatch {
  ScoredBatch real;
  ScoredBatch fake;
};

// Uniform average over classes, each class using its own direction row.
ObjectiveValue conditional_discriminator_loss_asgn(LossKind kind, const std::vector<ClassBatch>& batches,
                                                   const std::vector<Tensor>& omega_rows);
ObjectiveValue conditional_objective_gan(LossKind kind, const std::vector<ClassBatch>& batches);

// Subtracts a penalty from the objective total and records it as a component.
ObjectiveValue with_penalty(ObjectiveValue v, const Tensor& penalty);

// coefficient * E_t,x [ (||grad_x f(xhat)||_2 - 1)^2 ] over interpolates
// xhat = real + t (fake - real), t ~ U(0,1) per row. The input gradient is
// assembled by a layerwise Jacobian-vector sweep on the tape, so backward
// yields the penalty's parameter gradients.
Tensor gradient_penalty(const nets::FeatureNet& h, const Tensor& omega, const Tensor& real_x,
                        const Tensor& fake_x, double coefficient, Rng& rng);

}  // namespace asgn::obj
