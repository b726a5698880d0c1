#include "asgn/slicedot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asgn/kernels.hpp"
#include "asgn/rng.hpp"

namespace asgn::sot {

namespace {

constexpr double kWeightSumTol = 1e-9;

void check_weights(const std::vector<double>& w, const char* what) {
  if (w.empty()) throw std::invalid_argument(std::string(what) + ": empty measure");
  double total = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw std::invalid_argument(std::string(what) + ": weights must be positive");
    total += x;
  }
  if (std::abs(total - 1.0) > kWeightSumTol)
    throw std::invalid_argument(std::string(what) + ": weights not normalized (sum = " + std::to_string(total) +
                                ")");
}

std::vector<double> sphere_point(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double nrm = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    nrm = std::sqrt(kernels::sumsq(v.data(), d));
  } while (nrm == 0.0);
  for (auto& x : v) x /= nrm;
  return v;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(Tensor points) {
  if (points.rank() != 2 || points.rows() == 0)
    throw std::invalid_argument("DiscreteMeasure: rank-2 nonempty point array required");
  DiscreteMeasure m;
  m.weights.assign(points.rows(), 1.0 / static_cast<double>(points.rows()));
  m.points = std::move(points);
  return m;
}

DiscreteMeasure DiscreteMeasure::weighted(Tensor points, std::vector<double> w) {
  if (points.rank() != 2 || points.rows() == 0)
    throw std::invalid_argument("DiscreteMeasure: rank-2 nonempty point array required");
  if (w.size() != points.rows()) throw std::invalid_argument("DiscreteMeasure: weight count mismatch");
  check_weights(w, "DiscreteMeasure");
  DiscreteMeasure m;
  m.points = std::move(points);
  m.weights = std::move(w);
  return m;
}

Projected1D Projected1D::canonical(std::vector<double> values, std::vector<double> weights) {
  if (values.size() != weights.size()) throw std::invalid_argument("Projected1D: length mismatch");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // stable by construction: ties keep original index order
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  Projected1D out;
  out.values.reserve(n);
  out.weights.reserve(n);
  out.src = order;
  for (std::size_t i : order) {
    out.values.push_back(values[i]);
    out.weights.push_back(weights[i]);
  }
  return out;
}

FeatureFn identity_features() {
  return [](const Tensor& x) { return detach(x); };
}

FeatureFn net_features(const nets::FeatureNet& h) {
  // Copy the parameter values so the feature map is a snapshot.
  nets::FeatureNet snap;
  snap.net.layers = h.net.layers;
  for (const auto& w : h.net.weights) snap.net.weights.push_back(detach(w));
  for (const auto& b : h.net.biases) snap.net.biases.push_back(detach(b));
  return [snap](const Tensor& x) {
    ad::Tape scratch;
    return detach(nets::forward(snap.net, detach(x)));
  };
}

Projected1D srt_project(const FeatureFn& h, const std::vector<double>& omega, const DiscreteMeasure& m) {
  Tensor feats = h(m.points);
  if (feats.rank() != 2 || feats.rows() != m.size())
    throw std::invalid_argument("srt_project: feature map returned wrong shape");
  if (feats.cols() != omega.size())
    throw std::invalid_argument("srt_project: direction dim does not match feature dim");
  std::vector<double> vals(m.size());
  kernels::matvec(feats.values.data(), omega.data(), vals.data(), feats.rows(), feats.cols());
  return Projected1D::canonical(std::move(vals), m.weights);
}

namespace {

void check_canonical(const Projected1D& p, const char* what) {
  check_weights(p.weights, what);
  for (std::size_t i = 1; i < p.values.size(); ++i)
    if (p.values[i] < p.values[i - 1])
      throw std::invalid_argument(std::string(what) + ": values not in canonical sorted order");
}

// Merged sweep over the piecewise-constant quantile functions. Optionally
// accumulates the per-atom subgradient coefficients.
double w1_sweep(const Projected1D& a, const Projected1D& b, std::vector<double>* ca, std::vector<double>* cb) {
  check_canonical(a, "wasserstein1_1d");
  check_canonical(b, "wasserstein1_1d");
  if (ca) ca->assign(a.size(), 0.0);
  if (cb) cb->assign(b.size(), 0.0);
  std::size_t i = 0, j = 0;
  double ra = a.weights[0], rb = b.weights[0];
  double total = 0.0;
  while (true) {
    const double gap = a.values[i] - b.values[j];
    const double mass = std::min(ra, rb);
    total += mass * std::abs(gap);
    if (ca || cb) {
      const double s = gap > 0.0 ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
      if (ca) (*ca)[a.src[i]] += mass * s;
      if (cb) (*cb)[b.src[j]] -= mass * s;
    }
    ra -= mass;
    rb -= mass;
    if (ra <= 0.0) {
      if (++i == a.size()) break;
      ra = a.weights[i];
    }
    if (rb <= 0.0) {
      if (++j == b.size()) break;
      rb = b.weights[j];
    }
  }
  return total;
}

}  // namespace

double wasserstein1_1d(const Projected1D& a, const Projected1D& b) { return w1_sweep(a, b, nullptr, nullptr); }

double wasserstein1_1d_subgrad(const Projected1D& a, const Projected1D& b, std::vector<double>& coef_a,
                               std::vector<double>& coef_b) {
  return w1_sweep(a, b, &coef_a, &coef_b);
}

double wasserstein1_bruteforce(const Projected1D& a, const Projected1D& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n * m > 64) throw std::invalid_argument("wasserstein1_bruteforce: instance too large (n*m > 64)");
  if (n != m) throw std::invalid_argument("wasserstein1_bruteforce: equal-size instances only");
  check_weights(a.weights, "wasserstein1_bruteforce");
  check_weights(b.weights, "wasserstein1_bruteforce");
  for (double w : a.weights)
    if (std::abs(w - a.weights[0]) > 1e-12)
      throw std::invalid_argument("wasserstein1_bruteforce: equal-weight instances only");
  for (double w : b.weights)
    if (std::abs(w - b.weights[0]) > 1e-12)
      throw std::invalid_argument("wasserstein1_bruteforce: equal-weight instances only");

  // Optimal equal-weight coupling is a permutation (Birkhoff); enumerate all.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) cost += std::abs(a.values[i] - b.values[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

double asw_distance(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    std::size_t num_directions, std::uint64_t seed) {
  if (num_directions == 0) throw std::invalid_argument("asw_distance: need at least one direction");
  Tensor fa = h(mu.points), fb = h(nu.points);
  if (fa.cols() != fb.cols()) throw std::invalid_argument("asw_distance: feature dims differ");
  const std::size_t d = fa.cols();
  Rng rng(seed);
  double acc = 0.0;
  std::vector<double> pa(mu.size()), pb(nu.size());
  for (std::size_t k = 0; k < num_directions; ++k) {
    const std::vector<double> omega = sphere_point(d, rng);
    kernels::matvec(fa.values.data(), omega.data(), pa.data(), fa.rows(), d);
    kernels::matvec(fb.values.data(), omega.data(), pb.data(), fb.rows(), d);
    acc += wasserstein1_1d(Projected1D::canonical(pa, mu.weights), Projected1D::canonical(pb, nu.weights));
  }
  return acc / static_cast<double>(num_directions);
}

namespace {

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

std::vector<double> feature_mean_difference(const FeatureFn& h, const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu) {
  Tensor fa = h(mu.points), fb = h(nu.points);
  if (fa.cols() != fb.cols()) throw std::invalid_argument("feature dims differ between measures");
  std::vector<double> ma = weighted_mean_rows(fa, mu.weights);
  std::vector<double> mb = weighted_mean_rows(fb, nu.weights);
  for (std::size_t j = 0; j < ma.size(); ++j) ma[j] -= mb[j];
  return ma;
}

}  // namespace

MaxAswResult max_asw(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                     const MaxAswOptions& opts) {
  if (opts.restarts == 0) throw std::invalid_argument("max_asw: need at least one restart");
  Tensor fa = h(mu.points), fb = h(nu.points);
  if (fa.cols() != fb.cols()) throw std::invalid_argument("max_asw: feature dims differ");
  const std::size_t d = fa.cols();
  Rng rng(opts.seed);

  auto project_value = [&](const std::vector<double>& omega, std::vector<double>* ca,
                           std::vector<double>* cb) {
    std::vector<double> pa(mu.size()), pb(nu.size());
    kernels::matvec(fa.values.data(), omega.data(), pa.data(), fa.rows(), d);
    kernels::matvec(fb.values.data(), omega.data(), pb.data(), fb.rows(), d);
    Projected1D a = Projected1D::canonical(std::move(pa), mu.weights);
    Projected1D b = Projected1D::canonical(std::move(pb), nu.weights);
    if (ca) return wasserstein1_1d_subgrad(a, b, *ca, *cb);
    return wasserstein1_1d(a, b);
  };

  MaxAswResult best;
  best.omega.assign(d, 0.0);
  best.value = -1.0;

  for (std::size_t restart = 0; restart < opts.restarts; ++restart) {
    std::vector<double> omega;
    if (restart == 0) {
      // warm start at the closed-form mean-difference direction when it exists
      std::vector<double> diff = feature_mean_difference(h, mu, nu);
      const double nrm = std::sqrt(kernels::sumsq(diff.data(), d));
      if (nrm > 0.0) {
        omega = diff;
        for (auto& x : omega) x /= nrm;
      } else {
        omega = sphere_point(d, rng);
      }
    } else {
      omega = sphere_point(d, rng);
    }

    std::vector<double> ca, cb;
    auto tangent_gradient = [&](const std::vector<double>& om) {
      // sum_i ca[i] h(x_i) + sum_j cb[j] h(y_j), projected onto the tangent
      std::vector<double> grad(d, 0.0);
      for (std::size_t i = 0; i < mu.size(); ++i) {
        const double c = ca[i];
        if (c == 0.0) continue;
        const double* rowp = fa.values.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) grad[j] += c * rowp[j];
      }
      for (std::size_t i = 0; i < nu.size(); ++i) {
        const double c = cb[i];
        if (c == 0.0) continue;
        const double* rowp = fb.values.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) grad[j] += c * rowp[j];
      }
      const double go = kernels::dot(grad.data(), om.data(), d);
      for (std::size_t j = 0; j < d; ++j) grad[j] -= go * om[j];
      return grad;
    };

    for (std::size_t step = 0; step <= opts.steps; ++step) {
      const double value = project_value(omega, &ca, &cb);
      if (value > best.value) {
        best.value = value;
        best.omega = omega;
      }
      std::vector<double> grad = tangent_gradient(omega);
      const double tangent_norm = std::sqrt(kernels::sumsq(grad.data(), d));
      if (tangent_norm < opts.tolerance || step == opts.steps) break;
      const double eta =
          opts.step_size * 0.5 *
          (1.0 + std::cos(3.141592653589793 * static_cast<double>(step) / static_cast<double>(opts.steps)));
      double nrm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        omega[j] += eta * grad[j];
        nrm += omega[j] * omega[j];
      }
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) break;  // degenerate step; abandon this restart
      for (auto& x : omega) x /= nrm;
    }
  }

  // Convergence is reported for the returned argmax.
  {
    std::vector<double> ca, cb;
    project_value(best.omega, &ca, &cb);
    std::vector<double> grad(d, 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double c = ca[i];
      if (c == 0.0) continue;
      const double* rowp = fa.values.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) grad[j] += c * rowp[j];
    }
    for (std::size_t i = 0; i < nu.size(); ++i) {
      const double c = cb[i];
      if (c == 0.0) continue;
      const double* rowp = fb.values.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) grad[j] += c * rowp[j];
    }
    const double go = kernels::dot(grad.data(), best.omega.data(), d);
    for (std::size_t j = 0; j < d; ++j) grad[j] -= go * best.omega[j];
    best.tangent_grad_norm = std::sqrt(kernels::sumsq(grad.data(), d));
    best.converged = best.tangent_grad_norm < opts.tolerance;
  }
  return best;
}

double fm_star(const FeatureFn& h, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> diff = feature_mean_difference(h, mu, nu);
  return std::sqrt(kernels::sumsq(diff.data(), diff.size()));
}

std::vector<double> optimal_direction(const FeatureFn& h, const DiscreteMeasure& mu,
                                      const DiscreteMeasure& nu) {
  std::vector<double> diff = feature_mean_difference(h, mu, nu);
  const double nrm = std::sqrt(kernels::sumsq(diff.data(), diff.size()));
  if (nrm == 0.0)
    throw std::domain_error("optimal_direction: zero feature-mean difference (degenerate diagnostic)");
  for (auto& x : diff) x /= nrm;
  return diff;
}

}  // namespace asgn::sot
