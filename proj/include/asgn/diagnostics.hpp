#pragma once

#include <functional>
#include <vector>

#include "asgn/objectives.hpp"
#include "asgn/slicedot.hpp"
#include "asgn/tensor.hpp"

namespace asgn::diag {

struct AlignmentRecord {
  std::size_t iteration = 0;
  double inner_product = 0.0;  // in [-1, 1]
};

// <omega, dhat> where dhat is the normalized difference of feature means
// under the loss kind's self-normalized weighting (the numerically estimated
// optimal direction for the reweighted measures).
double direction_alignment(const std::vector<double>& omega, const sot::FeatureFn& h, const Tensor& real_x,
                           const Tensor& fake_x, obj::LossKind kind);

// Variant on precomputed features/scores (used by the trainer, which already
// has the current batch's features in hand).
double direction_alignment_from_features(const std::vector<double>& omega, const Tensor& real_features,
                                         std::span<const double> real_scores, const Tensor& fake_features,
                                         std::span<const double> fake_scores, obj::LossKind kind);

// Empirical CDFs of the projections of both sample sets on a shared grid
// spanning their combined range. Optional per-sample weights (self-normalized
// internally); defaults to uniform. Requires at least 1000 samples per side.
struct CdfCurve {
  std::vector<double> grid;
  std::vector<double> f_real;
  std::vector<double> f_fake;
};

CdfCurve estimate_cdfs(const sot::FeatureFn& h, const std::vector<double>& omega, const Tensor& real_x,
                       const Tensor& fake_x, std::size_t grid_size,
                       const std::vector<double>* real_weights = nullptr,
                       const std::vector<double>* fake_weights = nullptr);

// Separability at the mean-difference direction: with omega aligned to
// d_h(real, fake), real projections stochastically dominate fake ones, so
// the test is F_fake - F_real >= -tolerance everywhere. On failure reports
// the worst crossing.
struct SeparabilityVerdict {
  bool separable = false;
  double crossing_location = 0.0;
  double crossing_magnitude = 0.0;
  double tolerance = 0.0;
};

SeparabilityVerdict separability_check(const CdfCurve& curve, double tolerance);

// Default tolerance absorbing empirical-CDF noise at n samples per side.
inline double separability_tolerance(std::size_t n) { return 2.0 / std::sqrt(static_cast<double>(n)); }

// Assigns each generated point to its nearest center when within radius; a
// mode counts as covered when its fraction of all points reaches
// min_fraction.
struct CoverageReport {
  std::size_t covered = 0;
  std::vector<double> fractions;  // one per center
};

CoverageReport mode_coverage(const Tensor& generated, const Tensor& centers, double radius,
                             double min_fraction);

// Measure reweighting I_{mu~^r} proportional to r * I_mu, as self-normalized
// atom weights; unweight is its exact inverse (weights divided by r,
// renormalized). Both require strictly positive r.
sot::DiscreteMeasure reweight(const sot::DiscreteMeasure& m, const std::vector<double>& r);
sot::DiscreteMeasure unweight(const sot::DiscreteMeasure& m, const std::vector<double>& r);

sot::DiscreteMeasure reweight(const sot::DiscreteMeasure& m, const std::function<double(double)>& r,
                              std::span<const double> scores);
sot::DiscreteMeasure unweight(const sot::DiscreteMeasure& m, const std::function<double(double)>& r,
                              std::span<const double> scores);

}  // namespace asgn::diag
