#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "asgn/rng.hpp"
#include "asgn/tape.hpp"
#include "asgn/tensor.hpp"

namespace asgn::nets {

enum class ActKind { identity, relu, lrelu };

struct Activation {
  ActKind kind = ActKind::identity;
  double slope = 0.0;  // lrelu negative slope

  static Activation identity() { return {ActKind::identity, 0.0}; }
  static Activation relu() { return {ActKind::relu, 0.0}; }
  static Activation lrelu(double slope) { return {ActKind::lrelu, slope}; }
};

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act;
};

// Weight init: uniform on [-b, b] with b = kFanInScale * sqrt(1 / fan_in);
// biases start at zero. Draw order is row-major per layer, layers in order.
inline constexpr double kFanInScale = 1.0;

struct Mlp {
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights;  // [out, in] per layer
  std::vector<Tensor> biases;   // [out] per layer

  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }
  std::vector<Tensor*> params();
  std::size_t param_count() const;
};

Mlp make_mlp(const std::vector<LayerSpec>& layers, Rng& rng);

Tensor apply_activation(const Tensor& t, Activation act);

// Differentiable forward pass, batch rows. forward_trace additionally keeps
// each layer's pre-activation (needed by the gradient-penalty sweep).
Tensor forward(const Mlp& net, const Tensor& x);

struct ForwardTrace {
  Tensor output;
  std::vector<Tensor> preacts;  // one per layer
};
ForwardTrace forward_trace(const Mlp& net, const Tensor& x);

// g_theta: R^{latent_dim} -> R^{data_dim}. In conditional mode the input is
// the latent concatenated with a one-hot class code.
struct Generator {
  Mlp net;
  std::size_t latent_dim = 0;
  std::size_t data_dim = 0;
  std::size_t classes = 1;
  bool conditional = false;
};

Generator make_generator(std::size_t latent_dim, std::size_t data_dim, std::size_t hidden,
                         std::size_t depth, Activation hidden_act, Rng& rng, std::size_t classes = 0);

Tensor generate(const Generator& g, const Tensor& z);

// h: R^{data_dim} -> R^{feature_dim}; the last layer is linear so the raw
// feature vector feeds the inner-product head.
struct FeatureNet {
  Mlp net;
  std::size_t feature_dim() const { return net.out_dim(); }
};

FeatureNet make_feature_net(std::size_t data_dim, std::size_t feature_dim, std::size_t hidden,
                            std::size_t depth, Activation hidden_act, Rng& rng);

// Slicing directions, one unit row per class ([1, D] in the unconditional
// case). Rows are renormalized after every optimizer step.
struct Direction {
  Tensor mat;  // [C, D]

  std::size_t classes() const { return mat.rows(); }
  std::size_t dim() const { return mat.cols(); }
};

Direction init_direction(std::size_t classes, std::size_t dim, Rng& rng);

// Projects every row back onto the unit sphere, in place. Throws
// std::domain_error on a zero row.
void renormalize(Direction& d);

double row_norm_value(const Direction& d, std::size_t c);
std::vector<double> direction_values(const Direction& d, std::size_t c);

// (features, scores) with scores[i] = <omega, h(x_i)> exactly; omega is a
// rank-1 tensor (typically ad::row of Direction::mat so gradients reach it).
std::pair<Tensor, Tensor> discriminate(const FeatureNet& h, const Tensor& omega, const Tensor& x);

// ---- checkpoints ------------------------------------------------------------
//
// Versioned binary format; doubles are stored as raw IEEE-754 little-endian
// bytes so save/load round-trips bitwise.

struct Checkpoint {
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  Generator generator;
  FeatureNet feature_net;
  Direction direction;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asgn::nets
