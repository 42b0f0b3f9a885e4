#pragma once

// Full pipeline: stage-1 solve, stage-2 uncertainty model, enforced band,
// metrics and on-disk artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deuq/metrics.hpp"
#include "deuq/serialize.hpp"
#include "deuq/stage1.hpp"
#include "deuq/uq.hpp"

namespace deuq {

enum class Method { BBB, Flipout, NLM, DER };

std::string to_string(Method m);
// ConfigError listing the valid tags for anything else.
Method method_from_string(const std::string& name);
std::vector<std::string> method_names();

struct ExperimentConfig {
  std::string preset = "linear_ode";
  Method method = Method::NLM;
  std::uint64_t seed = 0;
  bool lv_standard_form = false;

  MLPConfig stage1_net;
  TrainConfig stage1_train;

  MLPConfig stage2_net;
  std::size_t stage2_steps = 20000;
  double stage2_learning_rate = 1e-3;
  double rho_init = -5.0;
  double eps = 1e-2;
  double prior_std = 1.0;
  double der_lambda = 2.0;
  bool nlm_include_noise = false;
  std::size_t n_mc_samples = 1000;

  // Band grid points per axis (grid spans the extrapolation domain).
  std::vector<std::size_t> band_points;

  std::filesystem::path output_dir = "deuq_out";
  // Directory of reusable stage-1 solutions; empty disables the cache.
  std::filesystem::path cache_dir;

  // Throws ConfigError.
  void validate() const;
};

// Defaults for a preset: network input/output sizes, stage-1 epochs and
// collocation density, band grid.
ExperimentConfig default_config(const std::string& preset);

// Every effective parameter. Seeds of the sub-networks are derived from
// `seed` at run time and echoed separately.
json config_to_json(const ExperimentConfig& c);
// Overlays the keys present in `j` onto `base`.
ExperimentConfig config_from_json(const json& j, ExperimentConfig base);

ProblemSpec problem_for(const ExperimentConfig& c);

// Network config and training config with the sub-seeds filled in.
MLPConfig effective_stage1_net(const ExperimentConfig& c, const ProblemSpec& problem);
TrainConfig effective_stage1_train(const ExperimentConfig& c);
MLPConfig effective_stage2_net(const ExperimentConfig& c, const ProblemSpec& problem);

// Tensor-product grid with per-axis counts over `domain`, axis 0 fastest.
Eigen::MatrixXd band_grid(const std::vector<Interval>& domain, const std::vector<std::size_t>& counts);

struct RunArtifacts {
  std::filesystem::path band_file;
  std::filesystem::path stage1_file;
  std::filesystem::path report_file;
  std::filesystem::path config_file;
  std::filesystem::path posterior_file;
  BandReport report;
};

// Stage 1 only. Loads a compatible cached solution when one exists.
Stage1Result solve_stage1(const ExperimentConfig& c);

// True when a stored stage-1 solution was produced by this configuration.
bool stage1_compatible(const json& stored, const ExperimentConfig& c);

// Stage 2 in memory: the enforced band on the band grid, the reference
// solution there and the metrics. Writes nothing.
struct UqResult {
  PredictiveBand band;
  Eigen::MatrixXd reference;
  BandReport report;
  json posterior;
};
UqResult fit_uq(const ExperimentConfig& c, const Stage1Result& stage1);

// Runs stage 2 on `stage1` and writes every artifact into c.output_dir. The
// directory is assembled next to its destination and renamed into place, so
// it is either complete or absent.
RunArtifacts run_uq(const ExperimentConfig& c, const Stage1Result& stage1);

// solve_stage1 followed by run_uq.
RunArtifacts run(const ExperimentConfig& c);

// Writes only the stage-1 solution (and config echo) into c.output_dir.
std::filesystem::path run_solve(const ExperimentConfig& c);

// Header: coordinates, then mean, std, reference (suffixed by output name
// when there are several outputs), then in_train_domain. Values use 9
// significant digits.
std::string band_csv(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference);
void emit_band_csv(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference,
                   const std::filesystem::path& path);

// Recomputes the report from a saved band file (training region taken from
// its in_train_domain column).
BandReport report_from_band_csv(const std::filesystem::path& path);

json report_to_json(const BandReport& r);

}  // namespace deuq
