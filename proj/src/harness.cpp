#include "asgn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "asgn/adam.hpp"
#include "asgn/io.hpp"
#include "asgn/kernels.hpp"
#include "asgn/slicedot.hpp"
#include "asgn/tape.hpp"

namespace fs = std::filesystem;

namespace asgn::harness {

// ---- config -------------------------------------------------------------------

int ExperimentConfig::effective_d_steps() const {
  if (d_steps >= 1) return d_steps;
  return loss == obj::LossKind::wasserstein ? 5 : 1;
}

double ExperimentConfig::effective_gp() const {
  if (gp_coef >= 0.0) return gp_coef;
  return loss == obj::LossKind::wasserstein ? 10.0 : 0.0;
}

nets::Activation ExperimentConfig::feature_activation() const {
  if (activation == "relu") return nets::Activation::relu();
  if (activation == "lrelu") return nets::Activation::lrelu(lrelu_slope);
  throw std::invalid_argument("unknown activation: " + activation);
}

void ExperimentConfig::validate() const {
  if (method != "gan" && method != "asgn") throw std::invalid_argument("method must be gan or asgn");
  if (iters == 0) throw std::invalid_argument("iters must be positive");
  if (batch < 2) throw std::invalid_argument("batch must be at least 2");
  if (conditional) {
    if (classes < 1 || classes > kMogModes) throw std::invalid_argument("classes must be in 1..8");
    if (batch % classes != 0) throw std::invalid_argument("batch must be divisible by class count");
    if (diag_samples % classes != 0)
      throw std::invalid_argument("diag_samples must be divisible by class count");
  }
  if (effective_gp() < 0.0) throw std::invalid_argument("gp-coef must be >= 0");
  if (diag_every == 0) throw std::invalid_argument("diag-every must be positive");
  if (latent_dim == 0 || data_dim == 0 || feat_dim == 0) throw std::invalid_argument("zero dimension");
  if (out.empty()) throw std::invalid_argument("output directory not set");
  feature_activation();  // validates the name
}

void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto to_u = [&](const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); };
  auto to_d = [&](const std::string& v) { return std::stod(v); };
  auto to_b = [&](const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("bad boolean: " + v);
  };
  if (key == "method") cfg.method = value;
  else if (key == "loss") cfg.loss = obj::loss_kind_from_string(value);
  else if (key == "conditional") cfg.conditional = to_b(value);
  else if (key == "classes") cfg.classes = to_u(value);
  else if (key == "iters") cfg.iters = to_u(value);
  else if (key == "batch") cfg.batch = to_u(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "activation") cfg.activation = value;
  else if (key == "lrelu_slope") cfg.lrelu_slope = to_d(value);
  else if (key == "gp_coef") cfg.gp_coef = to_d(value);
  else if (key == "d_steps") cfg.d_steps = static_cast<int>(std::stol(value));
  else if (key == "out") cfg.out = value;
  else if (key == "diag_every") cfg.diag_every = to_u(value);
  else if (key == "latent_dim") cfg.latent_dim = to_u(value);
  else if (key == "data_dim") cfg.data_dim = to_u(value);
  else if (key == "gen_hidden") cfg.gen_hidden = to_u(value);
  else if (key == "gen_depth") cfg.gen_depth = to_u(value);
  else if (key == "feat_hidden") cfg.feat_hidden = to_u(value);
  else if (key == "feat_depth") cfg.feat_depth = to_u(value);
  else if (key == "feat_dim") cfg.feat_dim = to_u(value);
  else if (key == "lr") cfg.lr = to_d(value);
  else if (key == "beta1") cfg.beta1 = to_d(value);
  else if (key == "beta2") cfg.beta2 = to_d(value);
  else if (key == "diag_samples") cfg.diag_samples = to_u(value);
  else if (key == "cdf_grid") cfg.cdf_grid = to_u(value);
  else if (key == "coverage_radius") cfg.coverage_radius = to_d(value);
  else if (key == "coverage_min_fraction") cfg.coverage_min_fraction = to_d(value);
  else throw std::invalid_argument("unknown config key: " + key);
}

ExperimentConfig config_from_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path.string());
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string serialize(const ExperimentConfig& cfg) {
  std::ostringstream ss;
  ss << "method=" << cfg.method << "\n";
  ss << "loss=" << obj::to_string(cfg.loss) << "\n";
  ss << "conditional=" << (cfg.conditional ? "true" : "false") << "\n";
  ss << "classes=" << cfg.classes << "\n";
  ss << "iters=" << cfg.iters << "\n";
  ss << "batch=" << cfg.batch << "\n";
  ss << "seed=" << cfg.seed << "\n";
  ss << "activation=" << cfg.activation << "\n";
  ss << "lrelu_slope=" << io::fmt(cfg.lrelu_slope) << "\n";
  ss << "gp_coef=" << io::fmt(cfg.effective_gp()) << "\n";
  ss << "d_steps=" << cfg.effective_d_steps() << "\n";
  ss << "out=" << cfg.out << "\n";
  ss << "diag_every=" << cfg.diag_every << "\n";
  ss << "latent_dim=" << cfg.latent_dim << "\n";
  ss << "data_dim=" << cfg.data_dim << "\n";
  ss << "gen_hidden=" << cfg.gen_hidden << "\n";
  ss << "gen_depth=" << cfg.gen_depth << "\n";
  ss << "feat_hidden=" << cfg.feat_hidden << "\n";
  ss << "feat_depth=" << cfg.feat_depth << "\n";
  ss << "feat_dim=" << cfg.feat_dim << "\n";
  ss << "lr=" << io::fmt(cfg.lr) << "\n";
  ss << "beta1=" << io::fmt(cfg.beta1) << "\n";
  ss << "beta2=" << io::fmt(cfg.beta2) << "\n";
  ss << "diag_samples=" << cfg.diag_samples << "\n";
  ss << "cdf_grid=" << cfg.cdf_grid << "\n";
  ss << "coverage_radius=" << io::fmt(cfg.coverage_radius) << "\n";
  ss << "coverage_min_fraction=" << io::fmt(cfg.coverage_min_fraction) << "\n";
  return ss.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.out.clear();  // the hash identifies the run, not where it lives
  return io::fnv1a(serialize(c));
}

std::string run_name(const ExperimentConfig& cfg) {
  std::ostringstream ss;
  ss << cfg.method << "_" << obj::to_string(cfg.loss) << "_" << cfg.activation;
  if (cfg.effective_gp() > 0.0) ss << "_gp" << io::fmt(cfg.effective_gp());
  if (cfg.conditional) ss << "_cond";
  ss << "_s" << cfg.seed << "_h" << io::hex64(config_hash(cfg)).substr(8);
  return ss.str();
}

// ---- data ---------------------------------------------------------------------

Tensor mog8_centers() {
  Tensor c = Tensor::zeros({kMogModes, 2});
  for (std::size_t k = 0; k < kMogModes; ++k) {
    const double angle = 2.0 * 3.141592653589793238462643383279 * static_cast<double>(k) / 8.0;
    c.values[k * 2] = std::cos(angle);
    c.values[k * 2 + 1] = std::sin(angle);
  }
  return c;
}

namespace {

const Tensor& centers_cached() {
  static const Tensor c = mog8_centers();
  return c;
}

}  // namespace

Tensor sample_mog8(std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_mog8: n must be positive");
  const Tensor& c = centers_cached();
  Tensor out = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(rng.uniform_index(kMogModes));
    out.values[i * 2] = c.values[k * 2] + kMogSigma * rng.normal();
    out.values[i * 2 + 1] = c.values[k * 2 + 1] + kMogSigma * rng.normal();
  }
  return out;
}

Tensor sample_mog8(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_mog8(n, rng);
}

Tensor sample_conditional_mog(std::size_t n, std::size_t cls, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_conditional_mog: n must be positive");
  if (cls >= kMogModes) throw std::invalid_argument("sample_conditional_mog: class out of range");
  const Tensor& c = centers_cached();
  Tensor out = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i * 2] = c.values[cls * 2] + kMogSigma * rng.normal();
    out.values[i * 2 + 1] = c.values[cls * 2 + 1] + kMogSigma * rng.normal();
  }
  return out;
}

Tensor sample_conditional_mog(std::size_t n, std::size_t cls, std::uint64_t seed) {
  Rng rng(seed);
  return sample_conditional_mog(n, cls, rng);
}

// ---- trainer --------------------------------------------------------------------

namespace {

// rng stream salts
constexpr std::uint64_t kStreamInit = 1, kStreamData = 2, kStreamLatent = 3, kStreamGp = 4;
constexpr std::uint64_t kStreamTrainDiag = 1u << 20;
constexpr std::uint64_t kStreamReport = 1u << 21;

Tensor latent_batch(std::size_t n, std::size_t dz, Rng& rng) {
  Tensor z = Tensor::zeros({n, dz});
  for (auto& v : z.values) v = rng.normal();
  return z;
}

// Latents with a one-hot class block appended, one class per row-chunk.
Tensor latent_batch_conditional(std::size_t per_class, std::size_t classes, std::size_t dz, Rng& rng) {
  const std::size_t n = per_class * classes;
  Tensor z = Tensor::zeros({n, dz + classes});
  for (std::size_t i = 0; i < n; ++i) {
    double* rowp = z.values.data() + i * (dz + classes);
    for (std::size_t j = 0; j < dz; ++j) rowp[j] = rng.normal();
    rowp[dz + i / per_class] = 1.0;
  }
  return z;
}

Tensor latent_batch_one_class(std::size_t n, std::size_t cls, std::size_t classes, std::size_t dz,
                              Rng& rng) {
  Tensor z = Tensor::zeros({n, dz + classes});
  for (std::size_t i = 0; i < n; ++i) {
    double* rowp = z.values.data() + i * (dz + classes);
    for (std::size_t j = 0; j < dz; ++j) rowp[j] = rng.normal();
    rowp[dz + cls] = 1.0;
  }
  return z;
}

struct CachedBatch {
  Tensor real_features;  // detached
  std::vector<double> real_scores;
  Tensor fake_features;
  std::vector<double> fake_scores;
};

double alignment_from_cache(const nets::Direction& dir, const std::vector<CachedBatch>& cache,
                            obj::LossKind kind) {
  double acc = 0.0;
  for (std::size_t c = 0; c < cache.size(); ++c) {
    const auto& cb = cache[c];
    acc += diag::direction_alignment_from_features(nets::direction_values(dir, c), cb.real_features,
                                                   cb.real_scores, cb.fake_features, cb.fake_scores, kind);
  }
  return acc / static_cast<double>(cache.size());
}

Tensor generate_for_diag(const nets::Generator& gen, std::size_t n, Rng& rng) {
  Tensor z = gen.conditional
                 ? latent_batch_conditional(n / gen.classes, gen.classes, gen.latent_dim, rng)
                 : latent_batch(n, gen.latent_dim, rng);
  return nets::generate(gen, z);
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path run_dir(cfg.out);
  fs::create_directories(run_dir);
  io::write_text_file(run_dir / "config.cfg", serialize(cfg));

  const Rng base(cfg.seed);
  Rng init_rng = base.stream(kStreamInit);
  Rng data_rng = base.stream(kStreamData);
  Rng latent_rng = base.stream(kStreamLatent);
  Rng gp_rng = base.stream(kStreamGp);

  const std::size_t classes = cfg.direction_rows();
  nets::Generator gen =
      nets::make_generator(cfg.latent_dim, cfg.data_dim, cfg.gen_hidden, cfg.gen_depth,
                           nets::Activation::lrelu(0.1), init_rng, cfg.conditional ? cfg.classes : 0);
  nets::FeatureNet feat = nets::make_feature_net(cfg.data_dim, cfg.feat_dim, cfg.feat_hidden,
                                                 cfg.feat_depth, cfg.feature_activation(), init_rng);
  nets::Direction dir = nets::init_direction(classes, cfg.feat_dim, init_rng);

  std::vector<Tensor*> d_params = feat.net.params();
  d_params.push_back(&dir.mat);
  opt::Adam adam_d(d_params, cfg.lr, cfg.beta1, cfg.beta2);
  opt::Adam adam_g(gen.net.params(), cfg.lr, cfg.beta1, cfg.beta2);

  std::ofstream runlog(run_dir / "runlog.csv", std::ios::trunc);
  std::ofstream timing(run_dir / "timing.csv", std::ios::trunc);
  if (!runlog || !timing) throw std::runtime_error("train: cannot open log files under " + cfg.out);
  runlog << "iteration,v_total,l_h,l_omega,gp,j,alignment,omega_norm,covered_modes\n";
  timing << "iteration,wall_s\n";

  const int d_steps = cfg.effective_d_steps();
  const double gp_coef = cfg.effective_gp();
  const obj::LossKind kind = cfg.loss;
  const bool asgn_mode = cfg.method == "asgn";
  const std::size_t per_class = cfg.batch / classes;

  const auto t0 = std::chrono::steady_clock::now();

  double v_total = 0.0, v_lh = 0.0, v_lomega = 0.0, v_gp = 0.0, j_value = 0.0;
  std::vector<CachedBatch> cache(classes);

  auto save_ckpt = [&](std::uint64_t iter, const fs::path& name) {
    nets::Checkpoint ck;
    ck.iteration = iter;
    ck.seed = cfg.seed;
    ck.generator = gen;
    ck.feature_net = feat;
    ck.direction = dir;
    nets::save_checkpoint(run_dir / name, ck);
  };

  std::uint64_t iter = 0;
  try {
    for (iter = 1; iter <= cfg.iters; ++iter) {
      // ---- discriminator ascent steps
      for (int ds = 0; ds < d_steps; ++ds) {
        ad::Tape tape;
        for (Tensor* p : d_params) tape.watch(*p);

        std::vector<obj::ClassBatch> batches(classes);
        std::vector<Tensor> omega_rows;
        omega_rows.reserve(classes);
        std::vector<Tensor> real_xs(classes), fake_xs(classes);
        for (std::size_t c = 0; c < classes; ++c) {
          real_xs[c] = cfg.conditional ? sample_conditional_mog(per_class, c, data_rng)
                                       : sample_mog8(cfg.batch, data_rng);
          Tensor z = cfg.conditional
                         ? latent_batch_one_class(per_class, c, cfg.classes, cfg.latent_dim, latent_rng)
                         : latent_batch(cfg.batch, cfg.latent_dim, latent_rng);
          fake_xs[c] = nets::generate(gen, z);  // generator unwatched: constant for this tape
          Tensor omega_c = ad::row(dir.mat, c);
          auto [fr, sr] = nets::discriminate(feat, omega_c, real_xs[c]);
          auto [ff, sf] = nets::discriminate(feat, omega_c, fake_xs[c]);
          batches[c].real = {fr, sr};
          batches[c].fake = {ff, sf};
          omega_rows.push_back(std::move(omega_c));
        }

        obj::ObjectiveValue objective;
        if (classes == 1) {
          objective = asgn_mode ? obj::discriminator_loss_asgn(kind, batches[0].real, batches[0].fake,
                                                               omega_rows[0])
                                : obj::objective_gan(kind, batches[0].real, batches[0].fake);
        } else {
          objective = asgn_mode ? obj::conditional_discriminator_loss_asgn(kind, batches, omega_rows)
                                : obj::conditional_objective_gan(kind, batches);
        }
        if (gp_coef > 0.0) {
          Tensor pen;
          for (std::size_t c = 0; c < classes; ++c) {
            Tensor pc = obj::gradient_penalty(feat, omega_rows[c], real_xs[c], fake_xs[c], gp_coef, gp_rng);
            pen = c == 0 ? pc : ad::add(pen, pc);
          }
          if (classes > 1) pen = ad::scale(pen, 1.0 / static_cast<double>(classes));
          objective = obj::with_penalty(objective, pen);
        }

        Tensor loss = ad::neg(objective.total);
        ad::Gradients grads = tape.backward(loss);
        adam_d.step(grads);
        nets::renormalize(dir);

        v_total = objective.total.item();
        v_lh = objective.l_h.item();
        v_lomega = objective.l_omega.item();
        v_gp = objective.gp.item();
        if (ds == d_steps - 1) {
          for (std::size_t c = 0; c < classes; ++c) {
            cache[c].real_features = detach(batches[c].real.features);
            cache[c].real_scores = batches[c].real.scores.values;
            cache[c].fake_features = detach(batches[c].fake.features);
            cache[c].fake_scores = batches[c].fake.scores.values;
          }
        }
      }

      // ---- generator descent step
      {
        ad::Tape tape;
        for (Tensor* p : gen.net.params()) tape.watch(*p);
        Tensor j;
        for (std::size_t c = 0; c < classes; ++c) {
          Tensor z = cfg.conditional
                         ? latent_batch_one_class(per_class, c, cfg.classes, cfg.latent_dim, latent_rng)
                         : latent_batch(cfg.batch, cfg.latent_dim, latent_rng);
          Tensor fake = nets::generate(gen, z);
          Tensor omega_c(Shape{cfg.feat_dim}, nets::direction_values(dir, c));
          auto [ff, sf] = nets::discriminate(feat, omega_c, fake);
          Tensor jc = obj::generator_loss(kind, sf);
          j = c == 0 ? jc : ad::add(j, jc);
        }
        if (classes > 1) j = ad::scale(j, 1.0 / static_cast<double>(classes));
        ad::Gradients grads = tape.backward(j);
        adam_g.step(grads);
        j_value = j.item();
      }

      // ---- logging
      double alignment = 0.0;
      try {
        alignment = alignment_from_cache(dir, cache, kind);
      } catch (const std::domain_error&) {
        alignment = 0.0;  // degenerate mean difference; see docs
      }
      double omega_norm = 0.0;
      for (std::size_t c = 0; c < classes; ++c) omega_norm = std::max(omega_norm, nets::row_norm_value(dir, c));

      std::string covered;
      if (iter % cfg.diag_every == 0 || iter == cfg.iters) {
        Rng diag_rng = base.stream(kStreamTrainDiag + iter);
        Tensor sample = generate_for_diag(gen, cfg.diag_samples, diag_rng);
        const auto cov =
            diag::mode_coverage(sample, centers_cached(), cfg.coverage_radius, cfg.coverage_min_fraction);
        covered = std::to_string(cov.covered);
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_%06llu.bin", static_cast<unsigned long long>(iter));
        save_ckpt(iter, name);
      }

      runlog << iter << ',' << io::fmt(v_total) << ',' << io::fmt(v_lh) << ',' << io::fmt(v_lomega) << ','
             << io::fmt(v_gp) << ',' << io::fmt(j_value) << ',' << io::fmt(alignment) << ','
             << io::fmt(omega_norm) << ',' << covered << '\n';
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timing << iter << ',' << io::fmt(wall) << '\n';
    }
  } catch (const std::exception& e) {
    // Non-finite objectives and degenerate batches abort with a dump.
    std::ostringstream dump;
    dump << "aborted at iteration " << iter << "\n";
    dump << "error: " << e.what() << "\n";
    dump << "last components: v_total=" << io::fmt(v_total) << " l_h=" << io::fmt(v_lh)
         << " l_omega=" << io::fmt(v_lomega) << " gp=" << io::fmt(v_gp) << " j=" << io::fmt(j_value) << "\n";
    io::write_text_file(run_dir / "nan_dump.txt", dump.str());
    throw;
  }

  save_ckpt(cfg.iters, "final.bin");
  runlog.flush();
  timing.flush();

  TrainResult res;
  res.run_dir = run_dir;
  res.final_checkpoint = run_dir / "final.bin";
  res.checkpoint.iteration = cfg.iters;
  res.checkpoint.seed = cfg.seed;
  res.checkpoint.generator = std::move(gen);
  res.checkpoint.feature_net = std::move(feat);
  res.checkpoint.direction = std::move(dir);
  return res;
}

// ---- diagnose -------------------------------------------------------------------

namespace {

std::string iter_tag(std::uint64_t iter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(iter));
  return buf;
}

}  // namespace

DiagnoseResult diagnose(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  const nets::Checkpoint ck = nets::load_checkpoint(checkpoint);
  const fs::path run_dir = checkpoint.parent_path().empty() ? fs::path(".") : checkpoint.parent_path();
  const std::string tag = iter_tag(ck.iteration);
  const std::string meta = "config-hash: " + io::hex64(config_hash(cfg));
  const obj::LossKind kind = cfg.loss;
  const std::size_t n = cfg.diag_samples;
  const std::size_t classes = ck.direction.classes();

  const Rng base(cfg.seed);
  Rng real_rng = base.stream(kStreamReport + 2 * ck.iteration);
  Rng fake_rng = base.stream(kStreamReport + 2 * ck.iteration + 1);

  Tensor real = ck.generator.conditional
                    ? [&] {
                        const std::size_t pc = n / classes;
                        Tensor out = Tensor::zeros({pc * classes, 2});
                        for (std::size_t c = 0; c < classes; ++c) {
                          Tensor part = sample_conditional_mog(pc, c, real_rng);
                          std::copy(part.values.begin(), part.values.end(),
                                    out.values.begin() + static_cast<std::ptrdiff_t>(c * pc * 2));
                        }
                        return out;
                      }()
                    : sample_mog8(n, real_rng);
  Tensor fake = generate_for_diag(ck.generator, n, fake_rng);

  const sot::FeatureFn h = sot::net_features(ck.feature_net);
  Tensor fr = h(real);
  Tensor ff = h(fake);

  // Scores against the trained direction (class-averaged in conditional mode).
  auto row_block = [](const Tensor& t, std::size_t block, std::size_t count) {
    const std::size_t d = t.cols();
    std::vector<double> vals(t.values.begin() + static_cast<std::ptrdiff_t>(block * count * d),
                             t.values.begin() + static_cast<std::ptrdiff_t>((block + 1) * count * d));
    return Tensor({count, d}, std::move(vals));
  };

  DiagnoseResult res;
  {
    double acc = 0.0;
    const std::size_t pc_r = real.rows() / classes, pc_f = fake.rows() / classes;
    for (std::size_t c = 0; c < classes; ++c) {
      const std::vector<double> om = nets::direction_values(ck.direction, c);
      Tensor fr_c = classes == 1 ? fr : row_block(fr, c, pc_r);
      Tensor ff_c = classes == 1 ? ff : row_block(ff, c, pc_f);
      std::vector<double> sr(pc_r), sf(pc_f);
      kernels::matvec(fr_c.values.data(), om.data(), sr.data(), pc_r, fr.cols());
      kernels::matvec(ff_c.values.data(), om.data(), sf.data(), pc_f, ff.cols());
      acc += diag::direction_alignment_from_features(om, fr_c, sr, ff_c, sf, kind);
    }
    res.alignment = acc / static_cast<double>(classes);
  }

  // Separability at the mean-difference direction of the reweighted measures
  // (pooled samples; trained direction of class 0 provides the scores the
  // weighting is evaluated at).
  {
    const std::vector<double> om_trained = nets::direction_values(ck.direction, 0);
    std::vector<double> sr(real.rows()), sf(fake.rows());
    kernels::matvec(fr.values.data(), om_trained.data(), sr.data(), fr.rows(), fr.cols());
    kernels::matvec(ff.values.data(), om_trained.data(), sf.data(), ff.rows(), ff.cols());
    std::vector<double> rr = obj::weighting_values(kind, sr);
    std::vector<double> rf = obj::weighting_values(kind, sf);

    sot::DiscreteMeasure m_real = diag::reweight(sot::DiscreteMeasure::uniform(real), rr);
    sot::DiscreteMeasure m_fake = diag::reweight(sot::DiscreteMeasure::uniform(fake), rf);
    const std::vector<double> omega_star = sot::optimal_direction(h, m_real, m_fake);

    const bool unit_weights = kind == obj::LossKind::wasserstein || kind == obj::LossKind::hinge;
    diag::CdfCurve curve = diag::estimate_cdfs(h, omega_star, real, fake, cfg.cdf_grid,
                                               unit_weights ? nullptr : &m_real.weights,
                                               unit_weights ? nullptr : &m_fake.weights);
    res.separability = diag::separability_check(curve, diag::separability_tolerance(n));

    std::ostringstream cdf;
    cdf << "xi,f_real,f_fake\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i)
      cdf << io::fmt(curve.grid[i]) << ',' << io::fmt(curve.f_real[i]) << ',' << io::fmt(curve.f_fake[i])
          << '\n';
    const fs::path cdf_csv = run_dir / ("diag_cdf_" + tag + ".csv");
    io::write_text_file(cdf_csv, cdf.str());
    res.files.push_back(cdf_csv);

    const fs::path cdf_svg = run_dir / ("diag_cdf_" + tag + ".svg");
    io::write_line_svg(cdf_svg, "projected CDFs @ " + tag,
                       {{"real", "#1f77b4", curve.grid, curve.f_real},
                        {"fake", "#ff7f0e", curve.grid, curve.f_fake}},
                       meta);
    res.files.push_back(cdf_svg);
  }

  // Coverage (+ per-class mass for conditional checkpoints).
  {
    res.coverage =
        diag::mode_coverage(fake, centers_cached(), cfg.coverage_radius, cfg.coverage_min_fraction);
    std::ostringstream cov;
    cov << "mode,fraction\n";
    for (std::size_t c = 0; c < res.coverage.fractions.size(); ++c)
      cov << c << ',' << io::fmt(res.coverage.fractions[c]) << '\n';
    if (ck.generator.conditional) {
      const std::size_t pc = fake.rows() / classes;
      const Tensor& centers = centers_cached();
      res.class_fractions.resize(classes, 0.0);
      cov << "class,within_radius_of_own_center\n";
      for (std::size_t c = 0; c < classes; ++c) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pc; ++i) {
          const double dx = fake.values[(c * pc + i) * 2] - centers.values[c * 2];
          const double dy = fake.values[(c * pc + i) * 2 + 1] - centers.values[c * 2 + 1];
          if (dx * dx + dy * dy <= cfg.coverage_radius * cfg.coverage_radius) ++hits;
        }
        res.class_fractions[c] = static_cast<double>(hits) / static_cast<double>(pc);
        cov << c << ',' << io::fmt(res.class_fractions[c]) << '\n';
      }
    }
    const fs::path cov_csv = run_dir / ("diag_coverage_" + tag + ".csv");
    io::write_text_file(cov_csv, cov.str());
    res.files.push_back(cov_csv);

    const fs::path scatter = run_dir / ("diag_scatter_" + tag + ".svg");
    io::write_scatter_svg(scatter, "samples @ " + tag,
                          {{"real", "#1f77b4", real.values}, {"generated", "#ff7f0e", fake.values}}, meta);
    res.files.push_back(scatter);
  }

  // Alignment series from the run log, when present.
  {
    const fs::path runlog = run_dir / "runlog.csv";
    std::ostringstream series;
    series << "iteration,alignment\n";
    if (fs::exists(runlog)) {
      const auto rows = io::read_csv(runlog);
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].size() >= 7) series << rows[i][0] << ',' << rows[i][6] << '\n';
    }
    const fs::path series_csv = run_dir / ("diag_alignment_series_" + tag + ".csv");
    io::write_text_file(series_csv, series.str());
    res.files.push_back(series_csv);
  }

  // Summary row.
  {
    std::ostringstream sum;
    sum << "method,loss,iteration,alignment,covered_modes,separable,crossing_xi,crossing_magnitude,"
           "tolerance\n";
    sum << cfg.method << ',' << obj::to_string(kind) << ',' << ck.iteration << ',' << io::fmt(res.alignment)
        << ',' << res.coverage.covered << ',' << (res.separability.separable ? 1 : 0) << ','
        << io::fmt(res.separability.crossing_location) << ',' << io::fmt(res.separability.crossing_magnitude)
        << ',' << io::fmt(res.separability.tolerance) << '\n';
    const fs::path sum_csv = run_dir / ("diag_summary_" + tag + ".csv");
    io::write_text_file(sum_csv, sum.str());
    res.files.push_back(sum_csv);
  }

  return res;
}

// ---- compare ---------------------------------------------------------------------

std::vector<CompareRow> compare(std::vector<ExperimentConfig> cfgs, const fs::path& out_dir) {
  if (cfgs.size() < 2) throw std::invalid_argument("compare: need at least two configs");
  fs::create_directories(out_dir);
  std::vector<CompareRow> rows;
  for (auto& cfg : cfgs) {
    CompareRow row;
    cfg.out = (out_dir / run_name(cfg)).string();
    row.cfg = cfg;
    try {
      const fs::path final_ckpt = fs::path(cfg.out) / "final.bin";
      if (!fs::exists(final_ckpt)) train(cfg);  // cached runs are reused as-is
      DiagnoseResult diag_res = diagnose(final_ckpt, cfg);
      row.covered = diag_res.coverage.covered;
      row.separable = diag_res.separability.separable;

      const auto log_rows = io::read_csv(fs::path(cfg.out) / "runlog.csv");
      if (log_rows.size() < 2) throw std::runtime_error("runlog.csv is empty");
      const std::size_t data_rows = log_rows.size() - 1;
      const std::size_t window = std::min<std::size_t>(1000, data_rows);
      double acc = 0.0;
      for (std::size_t i = log_rows.size() - window; i < log_rows.size(); ++i)
        acc += std::stod(log_rows[i].at(6));
      row.final_alignment_mean = acc / static_cast<double>(window);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream ss;
  ss << "method,loss,activation,gp_coef,d_steps,conditional,seed,covered_modes,final_alignment_mean,"
        "separable,error\n";
  for (const auto& r : rows) {
    ss << r.cfg.method << ',' << obj::to_string(r.cfg.loss) << ',' << r.cfg.activation << ','
       << io::fmt(r.cfg.effective_gp()) << ',' << r.cfg.effective_d_steps() << ','
       << (r.cfg.conditional ? 1 : 0) << ',' << r.cfg.seed << ',' << r.covered << ','
       << io::fmt(r.final_alignment_mean) << ',' << (r.separable ? 1 : 0) << ',' << r.error << '\n';
  }
  io::write_text_file(out_dir / "compare_summary.csv", ss.str());
  return rows;
}

// ---- selftest ---------------------------------------------------------------------

namespace {

bool report(std::ostream& os, const std::string& name, bool ok, const std::string& detail = "") {
  os << (ok ? "[ ok ] " : "[FAIL] ") << name;
  if (!ok && !detail.empty()) os << ": " << detail;
  os << '\n';
  return ok;
}

}  // namespace

int selftest(std::ostream& os) {
  int failures = 0;
  Rng rng(12345);

  // kernels: parallel results must be bitwise identical to serial
  {
    bool ok = true;
    const std::size_t n = 67, k = 41, m = 53;
    std::vector<double> a(n * k), b(m * k), b2(k * m), g(n * m), v(k);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    for (auto& x : b2) x = rng.normal();
    for (auto& x : g) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    std::vector<double> c1(n * m), c2(n * m);
    kernels::serial::matmul_nt(a.data(), b.data(), c1.data(), n, k, m);
    kernels::omp::matmul_nt(a.data(), b.data(), c2.data(), n, k, m);
    ok = ok && c1 == c2;
    std::vector<double> d1(n * m), d2(n * m);
    kernels::serial::matmul_nn(a.data(), b2.data(), d1.data(), n, k, m);
    kernels::omp::matmul_nn(a.data(), b2.data(), d2.data(), n, k, m);
    ok = ok && d1 == d2;
    std::vector<double> e1(k * m, 0.1), e2(k * m, 0.1);
    kernels::serial::matmul_tn_acc(a.data(), g.data(), e1.data(), n, k, m);
    kernels::omp::matmul_tn_acc(a.data(), g.data(), e2.data(), n, k, m);
    ok = ok && e1 == e2;
    std::vector<double> y1(n), y2(n);
    kernels::serial::matvec(a.data(), v.data(), y1.data(), n, k);
    kernels::omp::matvec(a.data(), v.data(), y2.data(), n, k);
    ok = ok && y1 == y2;
    if (!report(os, "kernels: omp bitwise-equal to serial", ok)) ++failures;
  }

  // autodiff: finite differences on a small composite
  {
    Tensor w = Tensor::zeros({4, 3});
    for (auto& x : w.values) x = rng.normal();
    Tensor x = Tensor::zeros({5, 3});
    for (auto& v2 : x.values) v2 = rng.normal();
    auto rep = ad::finite_difference_check(
        {&w},
        [&](ad::Tape&) {
          Tensor h = ad::leaky_relu(ad::linear(x, w), 0.1);
          return ad::mean_batch(ad::mul(ad::row_norm(h), ad::row_norm(h)));
        },
        1e-6, 1e-6);
    if (!report(os, "autodiff: gradients match finite differences", rep.pass,
                "max rel err " + io::fmt(rep.max_rel_error)))
      ++failures;
  }

  // stop-gradient split of the modified objective
  {
    Rng r2(7);
    nets::FeatureNet h = nets::make_feature_net(2, 8, 16, 2, nets::Activation::lrelu(0.1), r2);
    nets::Direction d = nets::init_direction(1, 8, r2);
    Tensor real = sample_mog8(16, r2);
    Tensor fake = sample_mog8(16, r2);
    ad::Tape tape;
    for (Tensor* p : h.net.params()) tape.watch(*p);
    tape.watch(d.mat);
    Tensor om = ad::row(d.mat, 0);
    auto [fr, sr] = nets::discriminate(h, om, real);
    auto [ff, sf] = nets::discriminate(h, om, fake);
    auto objective = obj::discriminator_loss_asgn(obj::LossKind::hinge, {fr, sr}, {ff, sf}, om);
    auto g_lh = tape.backward(objective.l_h);
    auto g_lo = tape.backward(objective.l_omega);
    bool ok = !g_lh.touched(d.mat);
    for (Tensor* p : h.net.params()) ok = ok && !g_lo.touched(*p);
    if (!report(os, "objectives: stop-gradient separates L^h and L^omega exactly", ok)) ++failures;
  }

  // 1D transport: closed form equals brute force
  {
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      const std::size_t sz = 2 + rng.uniform_index(7);
      std::vector<double> av(sz), bv(sz), w(sz, 1.0 / static_cast<double>(sz));
      for (auto& x : av) x = rng.uniform(-3, 3);
      for (auto& x : bv) x = rng.uniform(-3, 3);
      auto a = sot::Projected1D::canonical(av, w);
      auto b = sot::Projected1D::canonical(bv, w);
      ok = std::abs(sot::wasserstein1_1d(a, b) - sot::wasserstein1_bruteforce(a, b)) <= 1e-9;
    }
    if (!report(os, "transport: quantile sweep equals coupling oracle", ok)) ++failures;
  }

  // reweight/unweight round trip
  {
    bool ok = true;
    for (int t = 0; t < 10 && ok; ++t) {
      const std::size_t sz = 3 + rng.uniform_index(6);
      Tensor pts = Tensor::zeros({sz, 2});
      for (auto& x : pts.values) x = rng.normal();
      std::vector<double> w(sz);
      double tot = 0.0;
      for (auto& x : w) {
        x = rng.uniform(0.05, 1.0);
        tot += x;
      }
      for (auto& x : w) x /= tot;
      std::vector<double> r(sz);
      for (auto& x : r) x = rng.uniform(0.1, 5.0);
      auto m = sot::DiscreteMeasure::weighted(pts, w);
      auto back = diag::unweight(diag::reweight(m, r), r);
      for (std::size_t i = 0; i < sz; ++i) ok = ok && std::abs(back.weights[i] - w[i]) <= 1e-12;
    }
    if (!report(os, "diagnostics: reweight/unweight round trip", ok)) ++failures;
  }

  return failures;
}

}  // namespace asgn::harness
