#include "asgn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asgn/kernels.hpp"

namespace asgn::diag {

namespace {

std::vector<double> self_normalized(std::vector<double> w, const char* what) {
  double total = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw std::domain_error(std::string(what) + ": nonpositive weight");
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> weighted_mean_rows(const Tensor& feats, const std::vector<double>& w) {
  const std::size_t n = feats.rows(), d = feats.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i];
    const double* rowp = feats.values.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) mean[j] += wi * rowp[j];
  }
  return mean;
}

}  // namespace

double direction_alignment_from_features(const std::vector<double>& omega, const Tensor& real_features,
                                         std::span<const double> real_scores, const Tensor& fake_features,
                                         std::span<const double> fake_scores, obj::LossKind kind) {
  std::vector<double> wr = self_normalized(obj::weighting_values(kind, real_scores), "direction_alignment");
  std::vector<double> wf = self_normalized(obj::weighting_values(kind, fake_scores), "direction_alignment");
  std::vector<double> diff = weighted_mean_rows(real_features, wr);
  std::vector<double> mf = weighted_mean_rows(fake_features, wf);
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] -= mf[j];
  const double nrm = std::sqrt(kernels::sumsq(diff.data(), diff.size()));
  if (nrm == 0.0)
    throw std::domain_error("direction_alignment: zero feature-mean difference (degenerate diagnostic)");
  if (omega.size() != diff.size()) throw std::invalid_argument("direction_alignment: dim mismatch");
  return kernels::dot(omega.data(), diff.data(), diff.size()) / nrm;
}

double direction_alignment(const std::vector<double>& omega, const sot::FeatureFn& h, const Tensor& real_x,
                           const Tensor& fake_x, obj::LossKind kind) {
  Tensor fr = h(real_x);
  Tensor ff = h(fake_x);
  std::vector<double> sr(fr.rows()), sf(ff.rows());
  kernels::matvec(fr.values.data(), omega.data(), sr.data(), fr.rows(), fr.cols());
  kernels::matvec(ff.values.data(), omega.data(), sf.data(), ff.rows(), ff.cols());
  return direction_alignment_from_features(omega, fr, sr, ff, sf, kind);
}

namespace {

// Weighted empirical CDF of `vals` evaluated on an ascending grid.
std::vector<double> ecdf_on_grid(std::vector<double> vals, std::vector<double> w,
                                 const std::vector<double>& grid) {
  std::vector<std::size_t> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return vals[i] < vals[j]; });
  std::vector<double> f(grid.size(), 0.0);
  double cum = 0.0;
  std::size_t k = 0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    while (k < order.size() && vals[order[k]] <= grid[gi]) cum += w[order[k++]];
    f[gi] = cum;
  }
  return f;
}

}  // namespace

CdfCurve estimate_cdfs(const sot::FeatureFn& h, const std::vector<double>& omega, const Tensor& real_x,
                       const Tensor& fake_x, std::size_t grid_size, const std::vector<double>* real_weights,
                       const std::vector<double>* fake_weights) {
  if (real_x.rows() < 1000 || fake_x.rows() < 1000)
    throw std::invalid_argument("estimate_cdfs: need at least 1000 samples per side");
  if (grid_size < 2) throw std::invalid_argument("estimate_cdfs: grid too small");
  Tensor fr = h(real_x);
  Tensor ff = h(fake_x);
  std::vector<double> vr(fr.rows()), vf(ff.rows());
  kernels::matvec(fr.values.data(), omega.data(), vr.data(), fr.rows(), fr.cols());
  kernels::matvec(ff.values.data(), omega.data(), vf.data(), ff.rows(), ff.cols());

  const auto [lo_r, hi_r] = std::minmax_element(vr.begin(), vr.end());
  const auto [lo_f, hi_f] = std::minmax_element(vf.begin(), vf.end());
  const double lo = std::min(*lo_r, *lo_f);
  const double hi = std::max(*hi_r, *hi_f);

  CdfCurve curve;
  curve.grid.resize(grid_size);
  const double span = hi - lo;
  for (std::size_t i = 0; i < grid_size; ++i)
    curve.grid[i] = lo + span * static_cast<double>(i) / static_cast<double>(grid_size - 1);

  std::vector<double> wr = real_weights ? self_normalized(*real_weights, "estimate_cdfs")
                                        : std::vector<double>(vr.size(), 1.0 / static_cast<double>(vr.size()));
  std::vector<double> wf = fake_weights ? self_normalized(*fake_weights, "estimate_cdfs")
                                        : std::vector<double>(vf.size(), 1.0 / static_cast<double>(vf.size()));
  if (wr.size() != vr.size() || wf.size() != vf.size())
    throw std::invalid_argument("estimate_cdfs: weight count mismatch");
  curve.f_real = ecdf_on_grid(std::move(vr), std::move(wr), curve.grid);
  curve.f_fake = ecdf_on_grid(std::move(vf), std::move(wf), curve.grid);
  return curve;
}

SeparabilityVerdict separability_check(const CdfCurve& curve, double tolerance) {
  if (curve.grid.size() != curve.f_real.size() || curve.grid.size() != curve.f_fake.size() ||
      curve.grid.empty())
    throw std::invalid_argument("separability_check: malformed curve");
  SeparabilityVerdict v;
  v.tolerance = tolerance;
  double worst = 0.0;
  std::size_t worst_at = 0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    const double margin = curve.f_fake[i] - curve.f_real[i];
    if (margin < worst) {
      worst = margin;
      worst_at = i;
    }
  }
  v.separable = worst >= -tolerance;
  v.crossing_location = curve.grid[worst_at];
  v.crossing_magnitude = worst < 0.0 ? -worst : 0.0;
  return v;
}

CoverageReport mode_coverage(const Tensor& generated, const Tensor& centers, double radius,
                             double min_fraction) {
  if (radius <= 0.0) throw std::invalid_argument("mode_coverage: radius must be positive");
  if (generated.rank() != 2 || centers.rank() != 2 || generated.cols() != centers.cols())
    throw std::invalid_argument("mode_coverage: dim mismatch");
  const std::size_t n = generated.rows(), k = centers.rows(), d = generated.cols();
  std::vector<std::size_t> counts(k, 0);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = generated.values.data() + i * d;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double* q = centers.values.data() + c * d;
      double dist2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = p[j] - q[j];
        dist2 += diff * diff;
      }
      if (dist2 < best) {
        best = dist2;
        best_k = c;
      }
    }
    if (best <= r2) ++counts[best_k];
  }
  CoverageReport rep;
  rep.fractions.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    rep.fractions[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    if (rep.fractions[c] >= min_fraction) ++rep.covered;
  }
  return rep;
}

sot::DiscreteMeasure reweight(const sot::DiscreteMeasure& m, const std::vector<double>& r) {
  if (r.size() != m.size()) throw std::invalid_argument("reweight: r count mismatch");
  std::vector<double> w(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(r[i] > 0.0)) throw std::domain_error("reweight: nonpositive r value");
    w[i] = m.weights[i] * r[i];
  }
  const double total = kernels::sum(w.data(), w.size());
  for (auto& x : w) x /= total;
  return sot::DiscreteMeasure::weighted(m.points, std::move(w));
}

sot::DiscreteMeasure unweight(const sot::DiscreteMeasure& m, const std::vector<double>& r) {
  if (r.size() != m.size()) throw std::invalid_argument("unweight: r count mismatch");
  std::vector<double> w(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(r[i] > 0.0)) throw std::domain_error("unweight: nonpositive r value");
    w[i] = m.weights[i] / r[i];
  }
  const double total = kernels::sum(w.data(), w.size());
  for (auto& x : w) x /= total;
  return sot::DiscreteMeasure::weighted(m.points, std::move(w));
}

namespace {

std::vector<double> apply_r(const std::function<double(double)>& r, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = r(scores[i]);
  return out;
}

}  // namespace

sot::DiscreteMeasure reweight(const sot::DiscreteMeasure& m, const std::function<double(double)>& r,
                              std::span<const double> scores) {
  return reweight(m, apply_r(r, scores));
}

sot::DiscreteMeasure unweight(const sot::DiscreteMeasure& m, const std::function<double(double)>& r,
                              std::span<const double> scores) {
  return unweight(m, apply_r(r, scores));
}

}  // namespace asgn::diag
