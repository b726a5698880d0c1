// Property-based acceptance suite. Each criterion prints one pass/fail line;
// the exit code is the number of failed criteria. Deterministic, and fast
// enough to run on every build.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "asgn/diagnostics.hpp"
#include "asgn/harness.hpp"
#include "asgn/io.hpp"
#include "asgn/kernels.hpp"
#include "asgn/nets.hpp"
#include "asgn/objectives.hpp"
#include "asgn/rng.hpp"
#include "asgn/slicedot.hpp"
#include "asgn/tape.hpp"

using namespace asgn;
using obj::LossKind;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(), detail.c_str());
  if (!pass) ++g_failures;
}

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(s));
  for (auto& v : t.values) v = scale * rng.normal();
  return t;
}

Tensor randn_off_kink(Shape s, Rng& rng, double margin = 0.1) {
  Tensor t = randn(std::move(s), rng);
  for (auto& v : t.values)
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  return t;
}

std::vector<double> sphere(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) x = rng.normal();
  n = std::sqrt(kernels::sumsq(v.data(), d));
  for (auto& x : v) x /= n;
  return v;
}

// ---- criterion 1 ------------------------------------------------------------

void criterion_1() {
  Rng rng(1001);
  double worst = 0.0;
  std::string worst_at = "-";
  auto fd = [&](const char* name, std::vector<Tensor*> params, const ad::BuildFn& build, double step) {
    auto rep = ad::finite_difference_check(params, build, step, 1e-4);
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_at = name;
    }
  };

  // primitive operations
  {
    Tensor a = randn({4, 3}, rng), b = randn({4, 3}, rng), rv = randn({3}, rng);
    Tensor ak = randn_off_kink({4, 3}, rng);
    Tensor m = randn({4, 3}, rng), w = randn({5, 3}, rng), bias = randn({5}, rng), v = randn({3}, rng);
    Tensor u = randn({3}, rng), u2 = randn({3}, rng);
    Tensor pos = randn({4}, rng), pos3 = randn({3}, rng);
    for (auto& x : pos.values) x = std::abs(x) + 0.5;
    for (auto& x : pos3.values) x = std::abs(x) + 0.5;
    Tensor big = randn({2, 4}, rng), big2 = randn({4, 5}, rng);

    fd("add", {&a, &b}, [&](ad::Tape&) { return ad::sum(ad::add(a, b)); }, 1e-6);
    fd("add_rowvec", {&a, &rv}, [&](ad::Tape&) { return ad::sum(ad::add(a, rv)); }, 1e-6);
    fd("sub", {&a, &b}, [&](ad::Tape&) { return ad::sum(ad::sub(a, b)); }, 1e-6);
    fd("mul", {&a, &b}, [&](ad::Tape&) { return ad::sum(ad::mul(a, b)); }, 1e-6);
    fd("div", {&u, &pos3}, [&](ad::Tape&) { return ad::sum(ad::div(u, pos3)); }, 1e-6);
    fd("neg", {&a}, [&](ad::Tape&) { return ad::sum(ad::neg(a)); }, 1e-6);
    fd("affine", {&a}, [&](ad::Tape&) { return ad::sum(ad::affine(a, 1.7, 0.3)); }, 1e-6);
    fd("relu", {&ak}, [&](ad::Tape&) { return ad::sum(ad::relu(ak)); }, 1e-6);
    fd("leaky_relu", {&ak}, [&](ad::Tape&) { return ad::sum(ad::leaky_relu(ak, 0.1)); }, 1e-6);
    fd("min_zero", {&ak}, [&](ad::Tape&) { return ad::sum(ad::min_zero(ak)); }, 1e-6);
    fd("sigmoid", {&a}, [&](ad::Tape&) { return ad::sum(ad::sigmoid(a)); }, 1e-6);
    fd("log", {&pos}, [&](ad::Tape&) { return ad::sum(ad::log(pos)); }, 1e-6);
    fd("clamp", {&ak}, [&](ad::Tape&) { return ad::sum(ad::clamp(ak, -0.9, 0.9)); }, 1e-6);
    fd("matmul", {&big, &big2}, [&](ad::Tape&) { return ad::sum(ad::matmul(big, big2)); }, 1e-6);
    fd("linear", {&m, &w, &bias}, [&](ad::Tape&) { return ad::sum(ad::linear(m, w, bias)); }, 1e-6);
    fd("matvec", {&m, &v}, [&](ad::Tape&) { return ad::sum(ad::matvec(m, v)); }, 1e-6);
    fd("mean_batch", {&m}, [&](ad::Tape&) { return ad::sum(ad::mean_batch(m)); }, 1e-6);
    fd("dot", {&u, &u2}, [&](ad::Tape&) { return ad::dot(u, u2); }, 1e-6);
    fd("norm", {&u}, [&](ad::Tape&) { return ad::norm(u); }, 1e-6);
    fd("row_norm", {&m}, [&](ad::Tape&) { return ad::sum(ad::row_norm(m)); }, 1e-6);
    fd("l2_normalize", {&u}, [&](ad::Tape&) { return ad::sum(ad::l2_normalize(u)); }, 1e-6);
    fd("lerp", {&a, &b}, [&](ad::Tape&) { return ad::sum(ad::lerp(a, b, {0.1, 0.4, 0.6, 0.9})); }, 1e-6);
    fd("tile_rows", {&u}, [&](ad::Tape&) { return ad::sum(ad::tile_rows(u, 4)); }, 1e-6);
    fd("sigmoid_chain4", {&u},
       [&](ad::Tape&) {
         Tensor h = u;
         for (int i = 0; i < 4; ++i) h = ad::sigmoid(h);
         return ad::sum(h);
       },
       1e-6);
  }

  // Full modified objective, all four kinds, two-layer feature net. The
  // objective contains stop-gradients, so its reverse-mode gradient is the
  // gradient of the function with the frozen quantities pinned at their
  // base-point values; the finite-difference side must difference that
  // pinned function. A pinned rebuild has exactly the same reverse-mode
  // gradients (asserted below) and is an ordinary differentiable function.
  for (auto kind : {LossKind::wasserstein, LossKind::hinge, LossKind::saturating, LossKind::non_saturating}) {
    Rng r2(2000 + static_cast<int>(kind));
    nets::FeatureNet h = nets::make_feature_net(2, 6, 8, 1, nets::Activation::lrelu(0.1), r2);
    nets::Direction d = nets::init_direction(1, 6, r2);
    Tensor real = randn({10, 2}, r2), fake = randn({10, 2}, r2);
    std::vector<Tensor*> params = h.net.params();
    params.push_back(&d.mat);

    // base-point frozen quantities and the true objective's gradient
    Tensor omega_base, cvec;
    std::vector<Tensor> g_true;
    {
      ad::Tape tape;
      for (Tensor* p : params) tape.watch(*p);
      Tensor omega = ad::row(d.mat, 0);
      auto [fr, sr] = nets::discriminate(h, omega, real);
      auto [ff, sf] = nets::discriminate(h, omega, fake);
      auto v = obj::discriminator_loss_asgn(kind, {fr, sr}, {ff, sf}, omega);
      auto g = tape.backward(v.total);
      for (Tensor* p : params) g_true.push_back(g.at(*p));

      omega_base = detach(omega);
      auto wr = obj::weighting_values(kind, sr.values);
      auto wf = obj::weighting_values(kind, sf.values);
      double swr = 0.0, swf = 0.0;
      for (double x : wr) swr += x;
      for (double x : wf) swf += x;
      cvec = Tensor::zeros({6});
      for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 6; ++j)
          cvec.values[j] += wr[i] / swr * fr.values[i * 6 + j] - wf[i] / swf * ff.values[i * 6 + j];
    }

    auto pinned = [&](ad::Tape&) {
      Tensor omega = ad::row(d.mat, 0);
      auto [fr, sr] = nets::discriminate(h, omega_base, real);
      auto [ff, sf] = nets::discriminate(h, omega_base, fake);
      Tensor l_h = obj::discriminator_loss_gan(kind, sr, sf);
      return ad::add(l_h, ad::dot(omega, cvec));
    };

    // the pinned rebuild reproduces the true objective's gradient ...
    {
      ad::Tape tape;
      for (Tensor* p : params) tape.watch(*p);
      Tensor root = pinned(tape);
      auto g = tape.backward(root);
      double gap = 0.0;
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor gp = g.at(*params[pi]);
        for (std::size_t i = 0; i < gp.size(); ++i)
          gap = std::max(gap, std::abs(gp.values[i] - g_true[pi].values[i]));
      }
      if (gap > worst) {
        worst = gap;
        worst_at = "asgn_pinned_equiv_" + obj::to_string(kind);
      }
    }

    // ... and matches central finite differences
    fd(("asgn_objective_" + obj::to_string(kind)).c_str(), params, pinned, 1e-5);
  }

  criterion(1, "gradient correctness (primitive ops + full modified objective)", worst <= 1e-4,
            "max rel err " + io::fmt(worst) + " at " + worst_at);
}

// ---- criterion 2 ------------------------------------------------------------

void criterion_2() {
  bool pass = true;
  std::string detail = "all kinds exact";
  for (auto kind : {LossKind::wasserstein, LossKind::hinge, LossKind::saturating, LossKind::non_saturating}) {
    Rng rng(3000 + static_cast<int>(kind));
    nets::FeatureNet h = nets::make_feature_net(2, 12, 16, 2, nets::Activation::lrelu(0.1), rng);
    nets::Direction d = nets::init_direction(1, 12, rng);
    Tensor real = randn({24, 2}, rng), fake = randn({24, 2}, rng);
    ad::Tape tape;
    for (Tensor* p : h.net.params()) tape.watch(*p);
    tape.watch(d.mat);
    Tensor omega = ad::row(d.mat, 0);
    auto [fr, sr] = nets::discriminate(h, omega, real);
    auto [ff, sf] = nets::discriminate(h, omega, fake);
    auto v = obj::discriminator_loss_asgn(kind, {fr, sr}, {ff, sf}, omega);

    auto g_lh = tape.backward(v.l_h);
    for (double x : g_lh.at(d.mat).values)
      if (x != 0.0) pass = false;
    auto g_lo = tape.backward(v.l_omega);
    for (Tensor* p : h.net.params())
      for (double x : g_lo.at(*p).values)
        if (x != 0.0) pass = false;
    if (!pass) {
      detail = "leak for kind " + obj::to_string(kind);
      break;
    }
  }
  criterion(2, "stop-gradient contract (dL^h/dw = 0, dL^w/dtheta_h = 0 exactly)", pass, detail);
}

// ---- criterion 3 ------------------------------------------------------------

void criterion_3() {
  Rng rng(4001);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.uniform_index(8);
    std::vector<double> av(n), bv(n), w(n, 1.0 / static_cast<double>(n));
    for (auto& x : av) x = rng.uniform(-5, 5);
    for (auto& x : bv) x = rng.uniform(-5, 5);
    auto a = sot::Projected1D::canonical(av, w);
    auto b = sot::Projected1D::canonical(bv, w);
    worst = std::max(worst, std::abs(sot::wasserstein1_1d(a, b) - sot::wasserstein1_bruteforce(a, b)));
  }
  criterion(3, "1D transport: closed form equals the coupling oracle (200 instances)", worst <= 1e-9,
            "max abs diff " + io::fmt(worst));
}

// ---- criterion 4 ------------------------------------------------------------

void criterion_4() {
  Rng rng(5001);
  double worst_value = 0.0, worst_angle = 0.0;

  for (int t = 0; t < 5; ++t) {
    // random feature net over random measures, D = 6
    nets::FeatureNet hnet = nets::make_feature_net(2, 6, 10, 2, nets::Activation::lrelu(0.1), rng);
    auto h = sot::net_features(hnet);
    auto mu = sot::DiscreteMeasure::uniform(randn({20, 2}, rng));
    auto nu = sot::DiscreteMeasure::uniform(randn({20, 2}, rng));

    Tensor fa = h(mu.points), fb = h(nu.points);
    std::vector<double> diff(6, 0.0);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        diff[j] += (fa.values[i * 6 + j] - fb.values[i * 6 + j]) / 20.0;

    // independent ascent oracle on <omega, diff> over the sphere; the step is
    // scaled by the gradient norm so convergence does not depend on ||diff||
    const double step_scale = 0.5 / std::sqrt(kernels::sumsq(diff.data(), 6));
    double best = -1e300;
    std::vector<double> best_omega;
    for (int restart = 0; restart < 4; ++restart) {
      std::vector<double> omega = sphere(6, rng);
      for (int step = 0; step < 300; ++step) {
        for (std::size_t j = 0; j < 6; ++j) omega[j] += step_scale * diff[j];
        const double nn = std::sqrt(kernels::sumsq(omega.data(), 6));
        for (auto& x : omega) x /= nn;
      }
      const double val = kernels::dot(omega.data(), diff.data(), 6);
      if (val > best) {
        best = val;
        best_omega = omega;
      }
    }

    const double fm = sot::fm_star(h, mu, nu);
    worst_value = std::max(worst_value, std::abs(fm - best));
    auto dhat = sot::optimal_direction(h, mu, nu);
    double dotp = 0.0;
    for (std::size_t j = 0; j < 6; ++j) dotp += dhat[j] * best_omega[j];
    worst_angle = std::max(worst_angle, std::acos(std::min(1.0, std::max(-1.0, dotp))));
  }

  // D = 2 dense grid variant
  {
    auto ident = sot::identity_features();
    auto mu = sot::DiscreteMeasure::uniform(randn({30, 2}, rng));
    auto nu = sot::DiscreteMeasure::uniform(randn({30, 2}, rng));
    double best = -1e300;
    double best_phi = 0.0;
    for (int k = 0; k < 100000; ++k) {
      const double phi = 2.0 * 3.141592653589793 * k / 100000.0;
      const double w0 = std::cos(phi), w1 = std::sin(phi);
      double m = 0.0;
      for (std::size_t i = 0; i < 30; ++i)
        m += (w0 * (mu.points.values[i * 2] - nu.points.values[i * 2]) +
              w1 * (mu.points.values[i * 2 + 1] - nu.points.values[i * 2 + 1])) /
             30.0;
      if (m > best) {
        best = m;
        best_phi = phi;
      }
    }
    const double fm = sot::fm_star(ident, mu, nu);
    worst_value = std::max(worst_value, std::abs(fm - best));
    auto dhat = sot::optimal_direction(ident, mu, nu);
    const double dotp = dhat[0] * std::cos(best_phi) + dhat[1] * std::sin(best_phi);
    worst_angle = std::max(worst_angle, std::acos(std::min(1.0, std::max(-1.0, dotp))));
  }

  criterion(4, "direction lemma: divergence equals sphere maximum, argmax is the mean difference",
            worst_value <= 1e-4 && worst_angle <= 1e-4,
            "value gap " + io::fmt(worst_value) + ", angle " + io::fmt(worst_angle));
}

// ---- criterion 5 ------------------------------------------------------------

void criterion_5() {
  Rng rng(6001);
  // two-layer generator, fixed latents and data batch
  nets::Generator gen = nets::make_generator(3, 2, 8, 1, nets::Activation::lrelu(0.1), rng);
  nets::FeatureNet hnet = nets::make_feature_net(2, 5, 8, 1, nets::Activation::lrelu(0.1), rng);
  auto h = sot::net_features(hnet);
  Tensor z = randn({16, 3}, rng);
  Tensor real = harness::sample_mog8(16, rng);
  auto mu0 = sot::DiscreteMeasure::uniform(real);

  auto fm_of_theta = [&]() {
    ad::Tape scratch;
    Tensor fake = nets::generate(gen, z);
    return sot::fm_star(h, mu0, sot::DiscreteMeasure::uniform(detach(fake)));
  };

  // finite-difference gradient of the divergence w.r.t. generator parameters
  std::vector<Tensor*> params = gen.net.params();
  std::vector<double> g_fd;
  const double step = 1e-6;
  for (Tensor* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->values[i];
      p->values[i] = saved + step;
      const double plus = fm_of_theta();
      p->values[i] = saved - step;
      const double minus = fm_of_theta();
      p->values[i] = saved;
      g_fd.push_back((plus - minus) / (2 * step));
    }
  }

  // reverse-mode gradient of J_Wass at the frozen optimal direction
  std::vector<double> omega_star;
  {
    ad::Tape scratch;
    Tensor fake = nets::generate(gen, z);
    omega_star = sot::optimal_direction(h, mu0, sot::DiscreteMeasure::uniform(detach(fake)));
  }
  std::vector<double> g_ad;
  {
    ad::Tape tape;
    for (Tensor* p : params) tape.watch(*p);
    Tensor fake = nets::generate(gen, z);
    auto [ff, sf] = nets::discriminate(hnet, Tensor(Shape{5}, omega_star), fake);
    Tensor j = obj::generator_loss(LossKind::wasserstein, sf);
    auto g = tape.backward(j);
    for (Tensor* p : params)
      for (double v : g.at(*p).values) g_ad.push_back(v);
  }

  double num = 0.0, den_a = 0.0, den_b = 0.0;
  for (std::size_t i = 0; i < g_fd.size(); ++i) {
    num += (g_fd[i] - g_ad[i]) * (g_fd[i] - g_ad[i]);
    den_a += g_fd[i] * g_fd[i];
    den_b += g_ad[i] * g_ad[i];
  }
  const double rel = std::sqrt(num) / std::max(std::sqrt(den_a), std::sqrt(den_b));
  criterion(5, "divergence gradient identity on a two-layer generator", rel <= 1e-3,
            "relative L2 error " + io::fmt(rel));
}

// ---- criterion 6 ------------------------------------------------------------

sot::FeatureFn rank_one_embedding(std::vector<double> v) {
  return [v](const Tensor& x) {
    const std::size_t n = x.rows(), d = v.size();
    Tensor out = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      const double m = x.values[i * x.cols()];
      const double mx = m * m * m + m;
      for (std::size_t j = 0; j < d; ++j) out.values[i * d + j] = mx * v[j];
    }
    return out;
  };
}

void criterion_6() {
  Rng rng(7001);
  double worst_eq = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 14, d = 5;
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    Tensor pa = Tensor::zeros({n, 1}), pb = Tensor::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      pa.values[i] = rng.uniform(-1, 1);
      pb.values[i] = pa.values[i] - rng.uniform(0.05, 0.9);
    }
    auto h = rank_one_embedding(v);
    auto mu = sot::DiscreteMeasure::uniform(pa);
    auto nu = sot::DiscreteMeasure::uniform(pb);
    sot::MaxAswOptions opts;
    opts.restarts = 4;
    opts.steps = 150;
    opts.seed = static_cast<std::uint64_t>(t);
    worst_eq = std::max(worst_eq, std::abs(sot::fm_star(h, mu, nu) - sot::max_asw(h, mu, nu, opts).value));
  }

  double worst_gap = 0.0;  // fm - max, positive means violation
  auto ident = sot::identity_features();
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4 + rng.uniform_index(12);
    auto mu = sot::DiscreteMeasure::uniform(randn({n, 3}, rng));
    auto nu = sot::DiscreteMeasure::uniform(randn({n, 3}, rng));
    sot::MaxAswOptions opts;
    opts.restarts = 2;
    opts.steps = 60;
    opts.seed = static_cast<std::uint64_t>(t);
    worst_gap = std::max(worst_gap, sot::fm_star(ident, mu, nu) - sot::max_asw(ident, mu, nu, opts).value);
  }

  criterion(6, "separable equality and the divergence/max-sliced sandwich", worst_eq <= 1e-6 && worst_gap <= 1e-8,
            "equality gap " + io::fmt(worst_eq) + ", sandwich violation " + io::fmt(worst_gap));
}

// ---- criterion 7 ------------------------------------------------------------

void criterion_7() {
  Rng rng(8001);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_index(12);
    Tensor pts = randn({n, 2}, rng);
    std::vector<double> w(n);
    double tot = 0.0;
    for (auto& x : w) tot += (x = rng.uniform(0.01, 1.0));
    for (auto& x : w) x /= tot;
    std::vector<double> r(n);
    for (auto& x : r) x = rng.uniform(0.02, 50.0);
    auto base = sot::DiscreteMeasure::weighted(pts, w);
    auto rt1 = diag::unweight(diag::reweight(base, r), r);
    auto rt2 = diag::reweight(diag::unweight(base, r), r);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(rt1.weights[i] - w[i]));
      worst = std::max(worst, std::abs(rt2.weights[i] - w[i]));
    }
  }
  criterion(7, "measure reweighting is a bijection (100 round trips)", worst <= 1e-12,
            "max weight error " + io::fmt(worst));
}

// ---- criterion 8 ------------------------------------------------------------

void criterion_8() {
  double worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double f = -6.0 + 12.0 * i / 63.0;
    Tensor score({1}, {f});
    ad::Tape tape;
    tape.watch(score);
    auto g = tape.backward(obj::generator_loss(LossKind::saturating, score));
    const double w = obj::weighting_values(LossKind::saturating, score.values)[0];
    worst = std::max(worst, std::abs(-g.at(score).values[0] - w));
  }
  bool ones_ok = true;
  Rng rng(9001);
  Tensor scores = randn({64}, rng, 3.0);
  ad::Tape tape;
  for (auto kind : {LossKind::wasserstein, LossKind::hinge})
    for (double v : obj::weighting(kind, scores).values)
      if (v != 1.0) ones_ok = false;
  criterion(8, "weighting table consistency (saturating derivative; unit weights)", worst <= 1e-10 && ones_ok,
            "max |dJ/df + r| " + io::fmt(worst));
}

}  // namespace

int main() {
  std::printf("property-based acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  std::printf("%d of 8 criteria failed\n", g_failures);
  return g_failures;
}
