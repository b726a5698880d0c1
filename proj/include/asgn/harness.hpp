#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asgn/diagnostics.hpp"
#include "asgn/nets.hpp"
#include "asgn/objectives.hpp"
#include "asgn/rng.hpp"
#include "asgn/tensor.hpp"

namespace asgn::harness {

// Full experiment description. Flags and config-file keys map 1:1 onto
// fields; unset d_steps / gp_coef resolve to loss-dependent defaults
// (wasserstein: 5 discriminator steps and penalty coefficient 10, everything
// else: 1 step, no penalty).
struct ExperimentConfig {
  std::string method = "asgn";  // gan | asgn
  obj::LossKind loss = obj::LossKind::hinge;
  bool conditional = false;
  std::size_t classes = 8;
  std::size_t iters = 10000;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  std::string activation = "lrelu";  // feature-net hidden activation: relu | lrelu
  double lrelu_slope = 0.1;
  double gp_coef = -1.0;  // < 0 means unset
  int d_steps = -1;       // < 0 means unset
  std::string out = "runs/default";
  std::size_t diag_every = 500;

  // architecture (config-file keys; defaults reproduce the experiment scale)
  std::size_t latent_dim = 10;
  std::size_t data_dim = 2;
  std::size_t gen_hidden = 128;
  std::size_t gen_depth = 3;
  std::size_t feat_hidden = 128;
  std::size_t feat_depth = 3;
  std::size_t feat_dim = 128;

  // optimizer
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;

  // diagnostics
  std::size_t diag_samples = 10000;
  std::size_t cdf_grid = 512;
  double coverage_radius = 0.15;
  double coverage_min_fraction = 0.01;

  int effective_d_steps() const;
  double effective_gp() const;
  nets::Activation feature_activation() const;
  std::size_t direction_rows() const { return conditional ? classes : 1; }
  void validate() const;
};

// Plain-text key=value config file; '#' starts a comment line.
ExperimentConfig config_from_file(const std::filesystem::path& path);
void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string serialize(const ExperimentConfig& cfg);  // canonical key order
std::uint64_t config_hash(const ExperimentConfig& cfg);
// Directory name embedding the distinguishing fields: method_loss_act[...]_sN.
std::string run_name(const ExperimentConfig& cfg);

// ---- data -------------------------------------------------------------------

// Eight isotropic Gaussians (sigma = 0.05), means evenly spaced on the unit
// circle starting at (1, 0); uniform mode choice.
Tensor mog8_centers();
Tensor sample_mog8(std::size_t n, Rng& rng);
Tensor sample_mog8(std::size_t n, std::uint64_t seed);
// Draws from mode `cls` only (classes are the modes, 0..7).
Tensor sample_conditional_mog(std::size_t n, std::size_t cls, Rng& rng);
Tensor sample_conditional_mog(std::size_t n, std::size_t cls, std::uint64_t seed);

inline constexpr double kMogSigma = 0.05;
inline constexpr std::size_t kMogModes = 8;

// ---- training ----------------------------------------------------------------

struct TrainResult {
  nets::Checkpoint checkpoint;
  std::filesystem::path run_dir;
  std::filesystem::path final_checkpoint;
};

// Alternating minimax loop; writes config snapshot, runlog.csv, timing.csv
// and checkpoints under cfg.out. Bitwise reproducible per (config, seed); a
// non-finite objective aborts with a diagnostic dump (nan_dump.txt).
TrainResult train(const ExperimentConfig& cfg);

// ---- reports -----------------------------------------------------------------

struct DiagnoseResult {
  double alignment = 0.0;
  diag::CoverageReport coverage;
  diag::SeparabilityVerdict separability;
  std::vector<double> class_fractions;  // conditional runs: per-class mass near own center
  std::vector<std::filesystem::path> files;
};

// Fresh-sample measurements for one checkpoint: alignment, weighted CDFs at
// the mean-difference direction with a separability verdict, mode coverage,
// scatter/CDF plots. Deterministic given (checkpoint, config).
DiagnoseResult diagnose(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg);

struct CompareRow {
  ExperimentConfig cfg;
  std::size_t covered = 0;
  double final_alignment_mean = 0.0;
  bool separable = false;
  std::string error;  // empty on success
};

// Runs (or loads, when a final checkpoint already exists under the run
// directory) each config, then summarizes one row per run into
// compare_summary.csv under out_dir. Per-run failures land in the row's
// error column instead of aborting the table.
std::vector<CompareRow> compare(std::vector<ExperimentConfig> cfgs, const std::filesystem::path& out_dir);

// Fast built-in health checks (gradient spot checks, transport oracle,
// kernel equivalence); prints one line per check, returns failure count.
int selftest(std::ostream& os);

}  // namespace asgn::harness
