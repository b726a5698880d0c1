#include "asgn/nets.hpp"

#include <cmath>
#include <fstream>

#include "asgn/io.hpp"
#include "asgn/kernels.hpp"

namespace asgn::nets {

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> out;
  out.reserve(weights.size() * 2);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

Mlp make_mlp(const std::vector<LayerSpec>& layers, Rng& rng) {
  if (layers.empty()) throw std::invalid_argument("make_mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in == 0 || layers[i].out == 0) throw std::invalid_argument("make_mlp: zero layer dim");
    if (i > 0 && layers[i].in != layers[i - 1].out)
      throw std::invalid_argument("make_mlp: chained layer dims do not match");
  }
  Mlp net;
  net.layers = layers;
  for (const auto& l : layers) {
    const double bound = kFanInScale * std::sqrt(1.0 / static_cast<double>(l.in));
    Tensor w = Tensor::zeros({l.out, l.in});
    for (auto& v : w.values) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor::zeros({l.out}));
  }
  return net;
}

Tensor apply_activation(const Tensor& t, Activation act) {
  switch (act.kind) {
    case ActKind::identity: return t;
    case ActKind::relu: return ad::relu(t);
    case ActKind::lrelu: return ad::leaky_relu(t, act.slope);
  }
  throw std::logic_error("apply_activation: bad kind");
}

Tensor forward(const Mlp& net, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != net.in_dim())
    throw std::invalid_argument("forward: input shape " + shape_str(x.shape) + " does not match net in_dim " +
                                std::to_string(net.in_dim()));
  Tensor h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    h = ad::linear(h, net.weights[i], net.biases[i]);
    h = apply_activation(h, net.layers[i].act);
  }
  return h;
}

ForwardTrace forward_trace(const Mlp& net, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != net.in_dim())
    throw std::invalid_argument("forward_trace: input dim mismatch");
  ForwardTrace tr;
  Tensor h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Tensor z = ad::linear(h, net.weights[i], net.biases[i]);
    tr.preacts.push_back(z);
    h = apply_activation(z, net.layers[i].act);
  }
  tr.output = h;
  return tr;
}

Generator make_generator(std::size_t latent_dim, std::size_t data_dim, std::size_t hidden,
                         std::size_t depth, Activation hidden_act, Rng& rng, std::size_t classes) {
  Generator g;
  g.latent_dim = latent_dim;
  g.data_dim = data_dim;
  g.conditional = classes > 0;
  g.classes = g.conditional ? classes : 1;
  const std::size_t in0 = latent_dim + (g.conditional ? classes : 0);
  std::vector<LayerSpec> layers;
  std::size_t prev = in0;
  for (std::size_t i = 0; i < depth; ++i) {
    layers.push_back({prev, hidden, hidden_act});
    prev = hidden;
  }
  layers.push_back({prev, data_dim, Activation::identity()});
  g.net = make_mlp(layers, rng);
  return g;
}

Tensor generate(const Generator& g, const Tensor& z) {
  return forward(g.net, z);
}

FeatureNet make_feature_net(std::size_t data_dim, std::size_t feature_dim, std::size_t hidden,
                            std::size_t depth, Activation hidden_act, Rng& rng) {
  std::vector<LayerSpec> layers;
  std::size_t prev = data_dim;
  for (std::size_t i = 0; i < depth; ++i) {
    layers.push_back({prev, hidden, hidden_act});
    prev = hidden;
  }
  layers.push_back({prev, feature_dim, Activation::identity()});
  FeatureNet h;
  h.net = make_mlp(layers, rng);
  return h;
}

Direction init_direction(std::size_t classes, std::size_t dim, Rng& rng) {
  if (classes == 0 || dim == 0) throw std::invalid_argument("init_direction: zero dims");
  Direction d;
  d.mat = Tensor::zeros({classes, dim});
  for (auto& v : d.mat.values) v = rng.normal();
  renormalize(d);
  return d;
}

void renormalize(Direction& d) {
  const std::size_t c = d.classes(), dim = d.dim();
  for (std::size_t i = 0; i < c; ++i) {
    double* row = d.mat.values.data() + i * dim;
    const double nrm = std::sqrt(kernels::sumsq(row, dim));
    if (nrm == 0.0) throw std::domain_error("renormalize: zero direction row");
    for (std::size_t j = 0; j < dim; ++j) row[j] /= nrm;
  }
}

double row_norm_value(const Direction& d, std::size_t c) {
  const std::size_t dim = d.dim();
  return std::sqrt(kernels::sumsq(d.mat.values.data() + c * dim, dim));
}

std::vector<double> direction_values(const Direction& d, std::size_t c) {
  const std::size_t dim = d.dim();
  const double* row = d.mat.values.data() + c * dim;
  return std::vector<double>(row, row + dim);
}

std::pair<Tensor, Tensor> discriminate(const FeatureNet& h, const Tensor& omega, const Tensor& x) {
  Tensor features = forward(h.net, x);
  Tensor scores = ad::matvec(features, omega);
  return {std::move(features), std::move(scores)};
}

// ---- checkpoint format --------------------------------------------------------
//
//   magic "ASGNCKP1" | seed u64 | iteration u64
//   generator:  latent u64 | data u64 | classes u64 | conditional u64 | mlp
//   feature net: mlp
//   direction:  rows u64 | dim u64 | values
//   mlp := layer count u64, then per layer: in u64 | out u64 | act u64 |
//          slope f64 | weight values | bias values

namespace {

constexpr char kMagic[9] = "ASGNCKP1";

void put_mlp(std::ostream& os, const Mlp& net) {
  io::put_u64(os, net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    io::put_u64(os, l.in);
    io::put_u64(os, l.out);
    io::put_u64(os, static_cast<std::uint64_t>(l.act.kind));
    io::put_f64(os, l.act.slope);
    io::put_f64_vec(os, net.weights[i].values);
    io::put_f64_vec(os, net.biases[i].values);
  }
}

Mlp get_mlp(std::istream& is) {
  Mlp net;
  const std::uint64_t n = io::get_u64(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerSpec l;
    l.in = io::get_u64(is);
    l.out = io::get_u64(is);
    const std::uint64_t kind = io::get_u64(is);
    if (kind > 2) throw std::runtime_error("checkpoint: bad activation kind");
    l.act.kind = static_cast<ActKind>(kind);
    l.act.slope = io::get_f64(is);
    net.layers.push_back(l);
    Tensor w({l.out, l.in}, io::get_f64_vec(is));
    Tensor b({l.out}, io::get_f64_vec(is));
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (net.layers.empty()) throw std::runtime_error("checkpoint: empty net");
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kMagic, 8);
  io::put_u64(os, ckpt.seed);
  io::put_u64(os, ckpt.iteration);
  io::put_u64(os, ckpt.generator.latent_dim);
  io::put_u64(os, ckpt.generator.data_dim);
  io::put_u64(os, ckpt.generator.classes);
  io::put_u64(os, ckpt.generator.conditional ? 1 : 0);
  put_mlp(os, ckpt.generator.net);
  put_mlp(os, ckpt.feature_net.net);
  io::put_u64(os, ckpt.direction.classes());
  io::put_u64(os, ckpt.direction.dim());
  io::put_f64_vec(os, ckpt.direction.mat.values);
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("load_checkpoint: corrupt or unknown format: " + path.string());
  Checkpoint ckpt;
  ckpt.seed = io::get_u64(is);
  ckpt.iteration = io::get_u64(is);
  ckpt.generator.latent_dim = io::get_u64(is);
  ckpt.generator.data_dim = io::get_u64(is);
  ckpt.generator.classes = io::get_u64(is);
  ckpt.generator.conditional = io::get_u64(is) != 0;
  ckpt.generator.net = get_mlp(is);
  ckpt.feature_net.net = get_mlp(is);
  const std::uint64_t rows = io::get_u64(is);
  const std::uint64_t dim = io::get_u64(is);
  ckpt.direction.mat = Tensor({rows, dim}, io::get_f64_vec(is));
  if (!is) throw std::runtime_error("load_checkpoint: truncated file: " + path.string());
  return ckpt;
}

}  // namespace asgn::nets
