#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "asgn/harness.hpp"
#include "asgn/io.hpp"

namespace fs = std::filesystem;
using asgn::harness::ExperimentConfig;

namespace {

// Shared flag set; every flag overrides the corresponding config-file key.
struct Flags {
  std::string config_file;
  std::string method, loss, activation, out;
  bool conditional = false;
  long long classes = -1, iters = -1, batch = -1, d_steps = -1, diag_every = -1;
  long long seed = -1;
  double lrelu_slope = -1.0, gp_coef = -1.0;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "plain-text key=value config file (flags override it)");
    app->add_option("--method", method)->check(CLI::IsMember({"gan", "asgn"}));
    app->add_option("--loss", loss)
        ->check(CLI::IsMember({"wasserstein", "hinge", "saturating", "non-saturating"}));
    app->add_flag("--conditional", conditional, "train one direction per class");
    app->add_option("--classes", classes);
    app->add_option("--iters", iters);
    app->add_option("--batch", batch);
    app->add_option("--seed", seed);
    app->add_option("--activation", activation)->check(CLI::IsMember({"relu", "lrelu"}));
    app->add_option("--lrelu-slope", lrelu_slope, "negative slope (default 0.1)");
    app->add_option("--gp-coef", gp_coef, "gradient penalty coefficient (default 0; 10 for wasserstein)");
    app->add_option("--d-steps", d_steps, "discriminator steps per generator step");
    app->add_option("--out", out, "output directory");
    app->add_option("--diag-every", diag_every, "diagnostic/checkpoint cadence");
  }

  ExperimentConfig build(const CLI::App* app) const {
    ExperimentConfig cfg;
    if (app->count("--config")) cfg = asgn::harness::config_from_file(config_file);
    if (app->count("--method")) cfg.method = method;
    if (app->count("--loss")) cfg.loss = asgn::obj::loss_kind_from_string(loss);
    if (app->count("--conditional")) cfg.conditional = conditional;
    if (app->count("--classes")) cfg.classes = static_cast<std::size_t>(classes);
    if (app->count("--iters")) cfg.iters = static_cast<std::size_t>(iters);
    if (app->count("--batch")) cfg.batch = static_cast<std::size_t>(batch);
    if (app->count("--seed")) cfg.seed = static_cast<std::uint64_t>(seed);
    if (app->count("--activation")) cfg.activation = activation;
    if (app->count("--lrelu-slope")) cfg.lrelu_slope = lrelu_slope;
    if (app->count("--gp-coef")) cfg.gp_coef = gp_coef;
    if (app->count("--d-steps")) cfg.d_steps = static_cast<int>(d_steps);
    if (app->count("--out")) cfg.out = out;
    if (app->count("--diag-every")) cfg.diag_every = static_cast<std::size_t>(diag_every);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial training with sliced-transport diagnostics on the 8-Gaussian benchmark"};
  app.require_subcommand(1);

  auto* cmd_train = app.add_subcommand("train", "run the alternating minimax loop");
  Flags train_flags;
  train_flags.attach(cmd_train);

  auto* cmd_diag = app.add_subcommand("diagnose", "fresh-sample reports for a checkpoint");
  Flags diag_flags;
  diag_flags.attach(cmd_diag);
  std::string ckpt_path;
  cmd_diag->add_option("checkpoint", ckpt_path, "checkpoint file")->required();

  auto* cmd_compare = app.add_subcommand("compare", "run/load several configs and tabulate them");
  std::vector<std::string> compare_cfgs;
  std::string compare_out = "runs/compare";
  cmd_compare->add_option("configs", compare_cfgs, "config files (two or more)")->required();
  cmd_compare->add_option("--out", compare_out, "directory for runs and the summary table");

  auto* cmd_selftest = app.add_subcommand("selftest", "fast built-in health checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      ExperimentConfig cfg = train_flags.build(cmd_train);
      auto res = asgn::harness::train(cfg);
      std::cout << "run complete: " << res.run_dir.string() << "\n";
      std::cout << "final checkpoint: " << res.final_checkpoint.string() << "\n";
      return 0;
    }
    if (cmd_diag->parsed()) {
      ExperimentConfig cfg = diag_flags.build(cmd_diag);
      auto res = asgn::harness::diagnose(ckpt_path, cfg);
      std::cout << "alignment " << asgn::io::fmt(res.alignment) << ", covered modes "
                << res.coverage.covered << ", separable " << (res.separability.separable ? "yes" : "no")
                << "\n";
      for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
      return 0;
    }
    if (cmd_compare->parsed()) {
      if (compare_cfgs.size() < 2) {
        std::cerr << "compare: need at least two config files\n";
        return 2;
      }
      std::vector<ExperimentConfig> cfgs;
      for (const auto& f : compare_cfgs) cfgs.push_back(asgn::harness::config_from_file(f));
      auto rows = asgn::harness::compare(cfgs, compare_out);
      std::cout << "wrote " << (fs::path(compare_out) / "compare_summary.csv").string() << "\n";
      for (const auto& r : rows) {
        std::cout << r.cfg.method << "/" << asgn::obj::to_string(r.cfg.loss) << " seed " << r.cfg.seed
                  << ": ";
        if (!r.error.empty())
          std::cout << "error: " << r.error << "\n";
        else
          std::cout << r.covered << " modes, alignment " << asgn::io::fmt(r.final_alignment_mean)
                    << (r.separable ? ", separable" : ", crossing") << "\n";
      }
      return 0;
    }
    if (cmd_selftest->parsed()) {
      const int failures = asgn::harness::selftest(std::cout);
      std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
      return failures == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
