#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "asgn/io.hpp"
#include "asgn/nets.hpp"
#include "asgn/rng.hpp"
#include "asgn/tape.hpp"

using namespace asgn;
namespace fs = std::filesystem;

namespace {

nets::FeatureNet identity_feature_net(std::size_t d) {
  nets::FeatureNet h;
  h.net.layers = {{d, d, nets::Activation::identity()}};
  Tensor w = Tensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) w.values[i * d + i] = 1.0;
  h.net.weights = {w};
  h.net.biases = {Tensor::zeros({d})};
  return h;
}

}  // namespace

TEST_CASE("direction init is unit-norm and seed-deterministic") {
  Rng rng(11);
  auto d = nets::init_direction(3, 32, rng);
  for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(nets::row_norm_value(d, c) - 1.0) <= 1e-12);

  Rng r1(5), r2(5);
  auto a = nets::make_generator(10, 2, 16, 2, nets::Activation::lrelu(0.1), r1);
  auto b = nets::make_generator(10, 2, 16, 2, nets::Activation::lrelu(0.1), r2);
  for (std::size_t i = 0; i < a.net.weights.size(); ++i)
    CHECK(a.net.weights[i].values == b.net.weights[i].values);
}

TEST_CASE("fan-in init bound and spread for a 2->128 layer") {
  Rng rng(123);
  auto net = nets::make_mlp({{2, 128, nets::Activation::relu()}}, rng);
  const double bound = nets::kFanInScale * std::sqrt(0.5);
  double maxabs = 0.0, sumsq = 0.0;
  for (double v : net.weights[0].values) {
    maxabs = std::max(maxabs, std::abs(v));
    sumsq += v * v;
  }
  CHECK(maxabs <= bound);
  const double stddev = std::sqrt(sumsq / static_cast<double>(net.weights[0].size()));
  CHECK(stddev == doctest::Approx(bound / std::sqrt(3.0)).epsilon(0.15));
}

TEST_CASE("generate: zero latent through a zero-bias identity layer") {
  nets::Generator g;
  g.latent_dim = 2;
  g.data_dim = 2;
  g.net = identity_feature_net(2).net;
  ad::Tape tape;
  Tensor out = nets::generate(g, Tensor::zeros({4, 2}));
  for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("generate: batch shape at experiment scale") {
  Rng rng(3);
  auto g = nets::make_generator(10, 2, 128, 3, nets::Activation::lrelu(0.1), rng);
  Tensor z = Tensor::zeros({256, 10});
  for (auto& v : z.values) v = rng.normal();
  ad::Tape tape;
  Tensor x = nets::generate(g, z);
  CHECK(x.shape == Shape{256, 2});
}

TEST_CASE("generate: gradient of mean output w.r.t. first-layer weights") {
  Rng rng(4);
  auto g = nets::make_generator(3, 2, 6, 2, nets::Activation::lrelu(0.1), rng);
  Tensor z = Tensor::zeros({8, 3});
  for (auto& v : z.values) v = rng.normal();
  auto rep = ad::finite_difference_check(
      {&g.net.weights[0]},
      [&](ad::Tape&) { return ad::sum(ad::mean_batch(nets::generate(g, z))); }, 1e-6, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("discriminate: basis projection and sign flip") {
  auto h = identity_feature_net(2);
  ad::Tape tape;
  Tensor omega({2}, {1, 0});
  Tensor x({1, 2}, {0.3, 0.9});
  auto [feats, scores] = nets::discriminate(h, omega, x);
  CHECK(scores.values[0] == doctest::Approx(0.3));

  Tensor omega_neg({2}, {-1, 0});
  auto [f2, s2] = nets::discriminate(h, omega_neg, x);
  CHECK(s2.values[0] == doctest::Approx(-0.3));
}

TEST_CASE("discriminate: scores equal separately computed feature dot products") {
  Rng rng(6);
  auto h = nets::make_feature_net(2, 16, 12, 2, nets::Activation::lrelu(0.1), rng);
  auto d = nets::init_direction(1, 16, rng);
  Tensor x = Tensor::zeros({9, 2});
  for (auto& v : x.values) v = rng.normal();
  ad::Tape tape;
  Tensor omega(Shape{16}, nets::direction_values(d, 0));
  auto [feats, scores] = nets::discriminate(h, omega, x);
  for (std::size_t i = 0; i < 9; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < 16; ++j) dot += feats.values[i * 16 + j] * omega.values[j];
    CHECK(std::abs(dot - scores.values[i]) <= 1e-12);
  }
}

TEST_CASE("discriminate: score bilinearity in the direction") {
  Rng rng(8);
  auto h = nets::make_feature_net(2, 8, 8, 2, nets::Activation::lrelu(0.1), rng);
  Tensor x = Tensor::zeros({5, 2});
  for (auto& v : x.values) v = rng.normal();
  Tensor omega = Tensor::zeros({8});
  for (auto& v : omega.values) v = rng.normal();
  Tensor omega3 = omega;
  for (auto& v : omega3.values) v *= 3.0;
  ad::Tape tape;
  auto [f1, s1] = nets::discriminate(h, omega, x);
  auto [f2, s2] = nets::discriminate(h, omega3, x);
  for (std::size_t i = 0; i < 5; ++i) CHECK(s2.values[i] == doctest::Approx(3.0 * s1.values[i]));
}

TEST_CASE("renormalize: 3-4-5, idempotence, post-step restore") {
  nets::Direction d;
  d.mat = Tensor({1, 2}, {3, 4});
  nets::renormalize(d);
  CHECK(d.mat.values[0] == doctest::Approx(0.6));
  CHECK(d.mat.values[1] == doctest::Approx(0.8));

  auto before = d.mat.values;
  nets::renormalize(d);
  CHECK(std::abs(d.mat.values[0] - before[0]) <= 1e-15);
  CHECK(std::abs(d.mat.values[1] - before[1]) <= 1e-15);

  d.mat.values[0] += 0.1;  // optimizer-style perturbation
  nets::renormalize(d);
  CHECK(std::abs(nets::row_norm_value(d, 0) - 1.0) <= 1e-12);

  nets::Direction zero;
  zero.mat = Tensor({1, 2}, {0, 0});
  CHECK_THROWS_AS(nets::renormalize(zero), std::domain_error);
}

TEST_CASE("activation swap changes only the nonlinearity") {
  Rng r1(9), r2(9);
  auto a = nets::make_feature_net(2, 32, 24, 3, nets::Activation::relu(), r1);
  auto b = nets::make_feature_net(2, 32, 24, 3, nets::Activation::lrelu(0.1), r2);
  CHECK(a.net.param_count() == b.net.param_count());
  REQUIRE(a.net.layers.size() == b.net.layers.size());
  for (std::size_t i = 0; i < a.net.layers.size(); ++i) {
    CHECK(a.net.layers[i].in == b.net.layers[i].in);
    CHECK(a.net.layers[i].out == b.net.layers[i].out);
    CHECK(a.net.weights[i].values == b.net.weights[i].values);
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  Rng rng(13);
  nets::Checkpoint ck;
  ck.iteration = 4242;
  ck.seed = 7;
  ck.generator = nets::make_generator(5, 2, 8, 2, nets::Activation::lrelu(0.1), rng, 4);
  ck.feature_net = nets::make_feature_net(2, 12, 8, 2, nets::Activation::relu(), rng);
  ck.direction = nets::init_direction(4, 12, rng);

  const fs::path p1 = fs::temp_directory_path() / "asgn_ckpt_test_1.bin";
  const fs::path p2 = fs::temp_directory_path() / "asgn_ckpt_test_2.bin";
  nets::save_checkpoint(p1, ck);
  nets::Checkpoint loaded = nets::load_checkpoint(p1);
  nets::save_checkpoint(p2, loaded);

  CHECK(io::read_text_file(p1) == io::read_text_file(p2));
  CHECK(loaded.iteration == ck.iteration);
  CHECK(loaded.seed == ck.seed);
  CHECK(loaded.generator.conditional);
  CHECK(loaded.generator.classes == 4);
  CHECK(loaded.direction.mat.values == ck.direction.mat.values);
  for (std::size_t i = 0; i < ck.feature_net.net.weights.size(); ++i)
    CHECK(loaded.feature_net.net.weights[i].values == ck.feature_net.net.weights[i].values);

  fs::remove(p1);
  fs::remove(p2);

  CHECK_THROWS_AS(nets::load_checkpoint(fs::temp_directory_path() / "asgn_no_such.bin"), std::runtime_error);
}

TEST_CASE("mlp construction rejects bad specs") {
  Rng rng(1);
  CHECK_THROWS_AS(nets::make_mlp({{0, 4, nets::Activation::relu()}}, rng), std::invalid_argument);
  CHECK_THROWS_AS(
      nets::make_mlp({{2, 4, nets::Activation::relu()}, {5, 4, nets::Activation::relu()}}, rng),
      std::invalid_argument);
  CHECK_THROWS_AS(nets::init_direction(0, 4, rng), std::invalid_argument);
}
