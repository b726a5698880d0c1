#include "asgn/objectives.hpp"

#include <cmath>

#include "asgn/kernels.hpp"

namespace asgn::obj {

namespace ad = asgn::ad;

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "wasserstein") return LossKind::wasserstein;
  if (s == "hinge") return LossKind::hinge;
  if (s == "saturating") return LossKind::saturating;
  if (s == "non-saturating" || s == "non_saturating") return LossKind::non_saturating;
  throw std::invalid_argument("unknown loss kind: " + s);
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::wasserstein: return "wasserstein";
    case LossKind::hinge: return "hinge";
    case LossKind::saturating: return "saturating";
    case LossKind::non_saturating: return "non-saturating";
  }
  return "?";
}

namespace {

// log of the clamped sigmoid, the common building block of the log-domain
// losses.
Tensor log_sigmoid_clamped(const Tensor& t) {
  return ad::log(ad::clamp(ad::sigmoid(t), kSigmoidClampEps, 1.0 - kSigmoidClampEps));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor generator_loss(LossKind kind, const Tensor& fake_scores) {
  switch (kind) {
    case LossKind::wasserstein:
    case LossKind::hinge:
      return ad::neg(ad::mean_batch(fake_scores));
    case LossKind::saturating:
      return ad::neg(ad::mean_batch(log_sigmoid_clamped(fake_scores)));
    case LossKind::non_saturating:
      // E[log s(1 - f)], exactly as specified for this kind.
      return ad::mean_batch(log_sigmoid_clamped(ad::affine(fake_scores, -1.0, 1.0)));
  }
  throw std::logic_error("generator_loss: bad kind");
}

Tensor weighting(LossKind kind, const Tensor& scores) {
  switch (kind) {
    case LossKind::wasserstein:
    case LossKind::hinge:
      return Tensor::full(scores.shape, 1.0);
    case LossKind::saturating:
      return ad::affine(ad::sigmoid(scores), -1.0, 1.0);  // 1 - s(f)
    case LossKind::non_saturating:
      return ad::sigmoid(scores);  // s(f)
  }
  throw std::logic_error("weighting: bad kind");
}

std::vector<double> weighting_values(LossKind kind, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  switch (kind) {
    case LossKind::wasserstein:
    case LossKind::hinge:
      for (auto& v : out) v = 1.0;
      break;
    case LossKind::saturating:
      for (std::size_t i = 0; i < scores.size(); ++i) out[i] = 1.0 - sigmoid_value(scores[i]);
      break;
    case LossKind::non_saturating:
      for (std::size_t i = 0; i < scores.size(); ++i) out[i] = sigmoid_value(scores[i]);
      break;
  }
  return out;
}

Tensor discriminator_loss_gan(LossKind kind, const Tensor& real_scores, const Tensor& fake_scores) {
  if (real_scores.size() == 0 || fake_scores.size() == 0)
    throw std::invalid_argument("discriminator_loss_gan: empty batch");
  switch (kind) {
    case LossKind::wasserstein:
      return ad::sub(ad::mean_batch(real_scores), ad::mean_batch(fake_scores));
    case LossKind::hinge:
      return ad::add(ad::mean_batch(ad::min_zero(ad::affine(real_scores, 1.0, -1.0))),
                     ad::mean_batch(ad::min_zero(ad::affine(fake_scores, -1.0, -1.0))));
    case LossKind::saturating:
    case LossKind::non_saturating:
      // Cross-entropy: E_real[log s(f)] + E_fake[log s(-f)].
      return ad::add(ad::mean_batch(log_sigmoid_clamped(real_scores)),
                     ad::mean_batch(log_sigmoid_clamped(ad::neg(fake_scores))));
  }
  throw std::logic_error("discriminator_loss_gan: bad kind");
}

namespace {

// Self-normalized importance weights, frozen: stop_gradient(r / sum r).
Tensor frozen_normalized_weights(LossKind kind, const Tensor& scores) {
  Tensor r = weighting(kind, scores);
  const double total = kernels::sum(r.values.data(), r.size());
  if (!(total > 0.0))
    throw std::runtime_error("discriminator_loss_asgn: all weights vanished (degenerate batch)");
  Tensor w = ad::stop_gradient(r);
  for (auto& v : w.values) v /= total;
  return w;
}

// Weighted mean of <omega, stop_gradient(h(x))> over one batch.
Tensor frozen_feature_projection(const Tensor& features, const Tensor& weights, const Tensor& omega) {
  Tensor proj = ad::matvec(ad::stop_gradient(features), omega);
  return ad::sum(ad::mul(proj, weights));
}

}  // namespace

ObjectiveValue discriminator_loss_asgn(LossKind kind, const ScoredBatch& real, const ScoredBatch& fake,
                                       const Tensor& omega) {
  // L^h: V with the direction frozen; gradients reach h only.
  Tensor omega_frozen = ad::stop_gradient(omega);
  Tensor sr = ad::matvec(real.features, omega_frozen);
  Tensor sf = ad::matvec(fake.features, omega_frozen);
  Tensor l_h = discriminator_loss_gan(kind, sr, sf);

  // L^omega: weighted feature-mean difference with features and weights
  // frozen; gradients reach omega only.
  Tensor wr = frozen_normalized_weights(kind, real.scores);
  Tensor wf = frozen_normalized_weights(kind, fake.scores);
  Tensor l_omega = ad::sub(frozen_feature_projection(real.features, wr, omega),
                           frozen_feature_projection(fake.features, wf, omega));

  ObjectiveValue v;
  v.total = ad::add(l_h, l_omega);
  v.l_h = std::move(l_h);
  v.l_omega = std::move(l_omega);
  v.gp = Tensor::scalar(0.0);
  return v;
}

ObjectiveValue objective_gan(LossKind kind, const ScoredBatch& real, const ScoredBatch& fake) {
  ObjectiveValue v;
  v.l_h = discriminator_loss_gan(kind, real.scores, fake.scores);
  v.l_omega = Tensor::scalar(0.0);
  v.total = ad::add(v.l_h, v.l_omega);
  v.gp = Tensor::scalar(0.0);
  return v;
}

namespace {

ObjectiveValue average_classes(const std::vector<ObjectiveValue>& parts) {
  const double inv = 1.0 / static_cast<double>(parts.size());
  Tensor total = parts[0].total, l_h = parts[0].l_h, l_omega = parts[0].l_omega;
  for (std::size_t c = 1; c < parts.size(); ++c) {
    total = ad::add(total, parts[c].total);
    l_h = ad::add(l_h, parts[c].l_h);
    l_omega = ad::add(l_omega, parts[c].l_omega);
  }
  ObjectiveValue v;
  v.total = ad::scale(total, inv);
  v.l_h = ad::scale(l_h, inv);
  v.l_omega = ad::scale(l_omega, inv);
  v.gp = Tensor::scalar(0.0);
  return v;
}

void check_class_batches(const std::vector<ClassBatch>& batches, std::size_t rows) {
  if (batches.empty()) throw std::invalid_argument("conditional loss: no class batches");
  if (rows != batches.size()) throw std::invalid_argument("conditional loss: missing class direction");
  for (const auto& b : batches)
    if (b.real.scores.size() == 0 || b.fake.scores.size() == 0)
      throw std::invalid_argument("conditional loss: missing class in a batch");
}

}  // namespace

ObjectiveValue conditional_discriminator_loss_asgn(LossKind kind, const std::vector<ClassBatch>& batches,
                                                   const std::vector<Tensor>& omega_rows) {
  check_class_batches(batches, omega_rows.size());
  std::vector<ObjectiveValue> parts;
  parts.reserve(batches.size());
  for (std::size_t c = 0; c < batches.size(); ++c)
    parts.push_back(discriminator_loss_asgn(kind, batches[c].real, batches[c].fake, omega_rows[c]));
  return average_classes(parts);
}

ObjectiveValue conditional_objective_gan(LossKind kind, const std::vector<ClassBatch>& batches) {
  check_class_batches(batches, batches.size());
  std::vector<ObjectiveValue> parts;
  parts.reserve(batches.size());
  for (const auto& b : batches) parts.push_back(objective_gan(kind, b.real, b.fake));
  return average_classes(parts);
}

ObjectiveValue with_penalty(ObjectiveValue v, const Tensor& penalty) {
  v.gp = penalty;
  v.total = ad::sub(v.total, penalty);
  return v;
}

Tensor gradient_penalty(const nets::FeatureNet& h, const Tensor& omega, const Tensor& real_x,
                        const Tensor& fake_x, double coefficient, Rng& rng) {
  if (coefficient < 0.0) throw std::invalid_argument("gradient_penalty: coefficient must be >= 0");
  if (real_x.shape != fake_x.shape)
    throw std::invalid_argument("gradient_penalty: real/fake batch shapes differ");
  const std::size_t n = real_x.rows();

  std::vector<double> t(n);
  for (auto& ti : t) ti = rng.uniform();
  Tensor xhat = ad::lerp(real_x, fake_x, t);

  nets::ForwardTrace trace = nets::forward_trace(h.net, xhat);
  const std::size_t layers = h.net.layers.size();

  // grad_x f(xhat) row by row via a reverse Jacobian-vector sweep expressed
  // in tape ops, so the ordinary backward pass yields the penalty's
  // parameter gradients. Activation derivative factors are piecewise
  // constant and enter through zero-gradient gate ops.
  Tensor v = ad::tile_rows(omega, n);
  for (std::size_t k = layers; k-- > 0;) {
    v = ad::matmul(v, h.net.weights[k]);  // [n, out_k] x [out_k, in_k]
    if (k > 0) {
      const auto act = h.net.layers[k - 1].act;
      if (act.kind == nets::ActKind::relu)
        v = ad::mul(v, ad::leaky_relu_gate(trace.preacts[k - 1], 0.0));
      else if (act.kind == nets::ActKind::lrelu)
        v = ad::mul(v, ad::leaky_relu_gate(trace.preacts[k - 1], act.slope));
    }
  }

  Tensor rn = ad::row_norm(v);
  Tensor dev = ad::affine(rn, 1.0, -1.0);
  return ad::scale(ad::mean_batch(ad::mul(dev, dev)), coefficient);
}

}  // namespace asgn::obj
