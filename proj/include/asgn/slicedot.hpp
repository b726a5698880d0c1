#pragma once

#include <functional>
#include <vector>

#include "asgn/nets.hpp"
#include "asgn/tensor.hpp"

namespace asgn::sot {

// Finite weighted point set standing in for a probability measure. Weights
// are strictly positive and sum to 1 within 1e-12.
struct DiscreteMeasure {
  Tensor points;                // [n, d]
  std::vector<double> weights;  // per point

  static DiscreteMeasure uniform(Tensor points);
  static DiscreteMeasure weighted(Tensor points, std::vector<double> w);

  std::size_t size() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }
};

// 1D projected sample measure in canonical form: sorted by value with a
// stable original-index tie break; `src` maps sorted position -> original
// atom index.
struct Projected1D {
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<std::size_t> src;

  static Projected1D canonical(std::vector<double> values, std::vector<double> weights);
  std::size_t size() const { return values.size(); }
};

// Batched feature map on plain values, [n, dx] -> [n, D].
using FeatureFn = std::function<Tensor(const Tensor&)>;

FeatureFn identity_features();
// Runs the net forward on a scratch tape and detaches the result.
FeatureFn net_features(const nets::FeatureNet& h);

// Projection of a measure through x -> <omega, h(x)>.
Projected1D srt_project(const FeatureFn& h, const std::vector<double>& omega, const DiscreteMeasure& m);

// Exact 1D 1-Wasserstein via a merged sweep over the two piecewise-constant
// quantile functions; handles unequal sizes and unequal weights. Throws if
// either weight vector does not sum to 1 (within 1e-9).
double wasserstein1_1d(const Projected1D& a, const Projected1D& b);

// Same value plus per-atom subgradient coefficients (in original atom
// order): d W1 / d xi_a[i] = coef_a[i], likewise for b. Used by the sphere
// ascent in max_asw.
double wasserstein1_1d_subgrad(const Projected1D& a, const Projected1D& b, std::vector<double>& coef_a,
                               std::vector<double>& coef_b);

// Test oracle: solves the discrete coupling problem by exhaustive matching.
// Restricted to equal-weight instances with n == m and n*m <= 64.
double wasserstein1_bruteforce(const Projected1D& a, const Projected1D& b);

// Monte-Carlo sliced distance: mean over uniformly drawn directions of the
// 1D distance between the projections (p = 1).
double asw_distance(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    std::size_t num_directions, std::uint64_t seed);

struct MaxAswResult {
  double value = 0.0;
  std::vector<double> omega;
  bool converged = false;
  double tangent_grad_norm = 0.0;
};

struct MaxAswOptions {
  std::size_t restarts = 8;
  std::size_t steps = 200;
  double step_size = 0.1;   // cosine-decayed over the steps
  double tolerance = 1e-6;  // on the sphere-tangent gradient norm
  std::uint64_t seed = 0;
};

// Projected gradient ascent over the unit sphere on the projected 1D
// distance; best value over restarts (restart 0 starts from the closed-form
// mean-difference direction when it exists). Non-convergence is reported via
// the flag, not an exception.
MaxAswResult max_asw(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                     const MaxAswOptions& opts = {});

// || E_mu[h] - E_nu[h] ||_2 with the measures' own weights.
double fm_star(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Normalized difference of weighted feature means: the closed-form maximizer
// of the projected mean difference over the sphere. Callers wanting the
// reweighted variant pass measures whose weights already carry the
// loss-specific r values. Throws std::domain_error when the mean difference
// vanishes (measures indistinguishable through h).
std::vector<double> optimal_direction(const FeatureFn& h, const DiscreteMeasure& mu,
                                      const DiscreteMeasure& nu);

}  // namespace asgn::sot
