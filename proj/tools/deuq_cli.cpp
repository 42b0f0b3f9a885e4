// deuq: two-stage uncertainty quantification for neural DE solvers.
//
//   deuq solve  --preset linear_ode
//   deuq uq     --preset linear_ode --method nlm      (needs a cached solve)
//   deuq run    --preset duffing --method bbb --seed 3
//   deuq report --band out/band.csv
//
// Parameter precedence: preset defaults < --config file < command-line flags.
// Artifacts go to --output, or $DEUQ_OUTPUT_ROOT/<preset>-seed<seed>/<method>
// (root defaults to ./deuq_out); stage-1 solutions are cached under
// <root>/cache unless --cache-dir is given.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "deuq/experiment.hpp"

namespace {

using namespace deuq;
namespace fs = std::filesystem;

struct Flags {
  std::string config_file;
  std::optional<std::string> preset, method, activation, sampler, output, cache_dir, stage1_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps, prior_std, der_lambda, rho_init, lr1, lr2;
  std::optional<std::size_t> mc_samples, epochs1, steps2, collocation, dataset_points;
  std::vector<std::size_t> hidden1, hidden2, band_points;
  bool lv_standard = false;
  bool nlm_noise = false;
};

void add_common(CLI::App* app, Flags& f, bool with_method) {
  app->add_option("--config", f.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--preset", f.preset, "linear_ode, duffing, lotka_volterra or burgers");
  if (with_method) app->add_option("--method", f.method, "bbb, flipout, nlm or der");
  app->add_option("--seed", f.seed, "top-level seed");
  app->add_option("--output", f.output, "artifact directory");
  app->add_option("--cache-dir", f.cache_dir, "stage-1 cache directory");
  app->add_option("--stage1-epochs", f.epochs1);
  app->add_option("--stage1-lr", f.lr1);
  app->add_option("--collocation", f.collocation, "collocation points per axis");
  app->add_option("--sampler", f.sampler, "equispaced, uniform_random or equispaced_jitter");
  app->add_option("--dataset-points", f.dataset_points, "stage-2 dataset points per axis");
  app->add_option("--hidden", f.hidden1, "stage-1 hidden widths")->expected(1, 3);
  app->add_option("--activation", f.activation, "tanh or sin");
  app->add_flag("--lv-standard-form", f.lv_standard, "textbook predator equation for lotka_volterra");
  if (!with_method) return;
  app->add_option("--stage2-hidden", f.hidden2, "stage-2 hidden widths")->expected(1, 3);
  app->add_option("--stage2-steps", f.steps2);
  app->add_option("--stage2-lr", f.lr2);
  app->add_option("--eps", f.eps, "likelihood standard deviation");
  app->add_option("--prior-std", f.prior_std);
  app->add_option("--der-lambda", f.der_lambda, "evidence regularizer weight");
  app->add_option("--rho-init", f.rho_init);
  app->add_option("--mc-samples", f.mc_samples, "posterior predictive samples");
  app->add_option("--band-points", f.band_points, "band grid points per axis");
  app->add_flag("--nlm-include-noise", f.nlm_noise, "add eps^2 to the NLM predictive variance");
}

ExperimentConfig build_config(const Flags& f, bool solve_only) {
  json file = json::object();
  if (!f.config_file.empty()) {
    try {
      file = read_json(f.config_file);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  std::string preset = "linear_ode";
  if (file.is_object() && file.contains("preset") && file["preset"].is_string()) preset = file["preset"];
  if (f.preset) preset = *f.preset;

  ExperimentConfig c = config_from_json(file, default_config(preset));
  c.preset = preset;
  if (f.method) c.method = method_from_string(*f.method);
  if (f.seed) c.seed = *f.seed;
  if (f.lv_standard) c.lv_standard_form = true;
  if (f.epochs1) c.stage1_train.epochs = *f.epochs1;
  if (f.lr1) c.stage1_train.learning_rate = *f.lr1;
  if (f.collocation) c.stage1_train.n_collocation = *f.collocation;
  if (f.sampler) c.stage1_train.sampler = sampler_from_string(*f.sampler);
  if (f.dataset_points) c.stage1_train.dataset_points = *f.dataset_points;
  if (!f.hidden1.empty()) c.stage1_net.hidden_sizes = f.hidden1;
  if (f.activation) {
    c.stage1_net.activation = activation_from_string(*f.activation);
    c.stage2_net.activation = c.stage1_net.activation;
  }
  if (!f.hidden2.empty()) c.stage2_net.hidden_sizes = f.hidden2;
  if (f.steps2) c.stage2_steps = *f.steps2;
  if (f.lr2) c.stage2_learning_rate = *f.lr2;
  if (f.eps) c.eps = *f.eps;
  if (f.prior_std) c.prior_std = *f.prior_std;
  if (f.der_lambda) c.der_lambda = *f.der_lambda;
  if (f.rho_init) c.rho_init = *f.rho_init;
  if (f.mc_samples) c.n_mc_samples = *f.mc_samples;
  if (!f.band_points.empty()) c.band_points = f.band_points;
  if (f.nlm_noise) c.nlm_include_noise = true;

  const char* env = std::getenv("DEUQ_OUTPUT_ROOT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("deuq_out");
  const std::string run_name = c.preset + "-seed" + std::to_string(c.seed);
  if (f.output) {
    c.output_dir = *f.output;
  } else if (!file.contains("output_dir")) {
    c.output_dir = root / run_name / (solve_only ? std::string("solve") : to_string(c.method));
  }
  if (f.cache_dir) {
    c.cache_dir = *f.cache_dir;
  } else if (!file.contains("cache_dir")) {
    c.cache_dir = root / "cache";
  }
  c.validate();
  return c;
}

void print_report(const BandReport& r) { std::cout << report_to_json(r).dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty quantification for neural differential-equation solvers"};
  app.require_subcommand(1);
  Flags solve_f, uq_f, run_f;
  std::string band_path;

  CLI::App* solve = app.add_subcommand("solve", "train the deterministic solver (stage 1)");
  add_common(solve, solve_f, false);
  CLI::App* uq = app.add_subcommand("uq", "fit an uncertainty model on a cached stage-1 solution");
  add_common(uq, uq_f, true);
  uq->add_option("--stage1", uq_f.stage1_file, "stage-1 JSON file (default: the cache)");
  CLI::App* runc = app.add_subcommand("run", "stage 1, stage 2, metrics and artifacts");
  add_common(runc, run_f, true);
  CLI::App* report = app.add_subcommand("report", "metrics from a saved band file");
  report->add_option("--band", band_path, "band CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) {
      const ExperimentConfig c = build_config(solve_f, true);
      std::cout << run_solve(c).string() << "\n";
    } else if (uq->parsed()) {
      const ExperimentConfig c = build_config(uq_f, false);
      Stage1Result s1;
      if (uq_f.stage1_file) {
        const json stored = read_json(*uq_f.stage1_file);
        if (!stage1_compatible(stored, c)) throw ConfigError("stage-1 file does not match this configuration");
        s1 = stage1_from_json(stored);
      } else {
        if (c.cache_dir.empty()) throw ConfigError("no stage-1 file given and the cache is disabled");
        // Only an existing solution is accepted here; training belongs to `solve`.
        bool found = false;
        if (fs::exists(c.cache_dir)) {
          for (const auto& entry : fs::directory_iterator(c.cache_dir)) {
            if (entry.path().extension() != ".json") continue;
            const json stored = read_json(entry.path());
            if (stage1_compatible(stored, c)) {
              s1 = stage1_from_json(stored);
              found = true;
              break;
            }
          }
        }
        if (!found) throw ConfigError("no cached stage-1 solution for this configuration; run `deuq solve` first");
      }
      print_report(run_uq(c, s1).report);
    } else if (runc->parsed()) {
      const ExperimentConfig c = build_config(run_f, false);
      print_report(run(c).report);
    } else if (report->parsed()) {
      print_report(report_from_band_csv(band_path));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
