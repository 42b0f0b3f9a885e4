#include "deuq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "deuq/rng.hpp"

namespace deuq {

namespace fs = std::filesystem;

std::string to_string(Method m) {
  switch (m) {
    case Method::BBB: return "bbb";
    case Method::Flipout: return "flipout";
    case Method::NLM: return "nlm";
    case Method::DER: return "der";
  }
  return "?";
}

std::vector<std::string> method_names() { return {"bbb", "flipout", "nlm", "der"}; }

Method method_from_string(const std::string& name) {
  if (name == "bbb") return Method::BBB;
  if (name == "flipout") return Method::Flipout;
  if (name == "nlm") return Method::NLM;
  if (name == "der") return Method::DER;
  throw ConfigError("unknown method '" + name + "' (valid: bbb, flipout, nlm, der)");
}

void ExperimentConfig::validate() const {
  make_preset(preset);
  stage1_train.validate();
  if (stage2_steps < 1) throw ConfigError("stage2_steps must be positive");
  if (!(stage2_learning_rate > 0.0)) throw ConfigError("stage2_learning_rate must be positive");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(prior_std > 0.0)) throw ConfigError("prior_std must be positive");
  if (!(der_lambda >= 0.0)) throw ConfigError("der_lambda must be nonnegative");
  if ((method == Method::BBB || method == Method::Flipout) && n_mc_samples < 2) {
    throw ConfigError("n_mc_samples must be at least 2");
  }
  for (std::size_t n : band_points) {
    if (n < 2) throw ConfigError("band grid needs at least 2 points per axis");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

ExperimentConfig default_config(const std::string& preset) {
  const ProblemSpec p = make_preset(preset);
  ExperimentConfig c;
  c.preset = preset;
  c.stage1_net.input_dim = p.n_inputs;
  c.stage1_net.output_dim = p.n_outputs;
  c.stage2_net = c.stage1_net;
  if (p.kind == ProblemKind::Burgers) {
    c.stage1_train.epochs = 5000;
    c.stage1_train.n_collocation = 32;
    c.stage1_train.dataset_points = 48;
    c.band_points = {41, 61};
  } else {
    c.stage1_train.epochs = 20000;
    c.stage1_train.n_collocation = 64;
    c.stage1_train.dataset_points = 128;
    c.band_points = {241};
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return json{{"preset", c.preset},
              {"method", to_string(c.method)},
              {"seed", c.seed},
              {"lv_standard_form", c.lv_standard_form},
              {"stage1_net", c.stage1_net},
              {"stage1_train", c.stage1_train},
              {"stage2_net", c.stage2_net},
              {"stage2_steps", c.stage2_steps},
              {"stage2_learning_rate", c.stage2_learning_rate},
              {"rho_init", c.rho_init},
              {"eps", c.eps},
              {"prior_std", c.prior_std},
              {"der_lambda", c.der_lambda},
              {"nlm_include_noise", c.nlm_include_noise},
              {"n_mc_samples", c.n_mc_samples},
              {"band_points", c.band_points},
              {"output_dir", c.output_dir.string()},
              {"cache_dir", c.cache_dir.string()}};
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  static const std::vector<std::string> known = {
      "preset",   "method",    "seed",       "lv_standard_form", "stage1_net",        "stage1_train",
      "stage2_net", "stage2_steps", "stage2_learning_rate", "rho_init", "eps",     "prior_std",
      "der_lambda", "nlm_include_noise", "n_mc_samples", "band_points", "output_dir", "cache_dir",
      // Written by the config echo; recomputed from `seed`, so ignored here.
      "derived_seeds"};
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown configuration key '" + key + "'");
  }
  try {
    c.preset = j.value("preset", c.preset);
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.lv_standard_form = j.value("lv_standard_form", c.lv_standard_form);
    if (j.contains("stage1_net")) from_json(j.at("stage1_net"), c.stage1_net);
    if (j.contains("stage1_train")) from_json(j.at("stage1_train"), c.stage1_train);
    if (j.contains("stage2_net")) from_json(j.at("stage2_net"), c.stage2_net);
    c.stage2_steps = j.value("stage2_steps", c.stage2_steps);
    c.stage2_learning_rate = j.value("stage2_learning_rate", c.stage2_learning_rate);
    c.rho_init = j.value("rho_init", c.rho_init);
    c.eps = j.value("eps", c.eps);
    c.prior_std = j.value("prior_std", c.prior_std);
    c.der_lambda = j.value("der_lambda", c.der_lambda);
    c.nlm_include_noise = j.value("nlm_include_noise", c.nlm_include_noise);
    c.n_mc_samples = j.value("n_mc_samples", c.n_mc_samples);
    c.band_points = j.value("band_points", c.band_points);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
  return c;
}

ProblemSpec problem_for(const ExperimentConfig& c) { return make_preset(c.preset, c.lv_standard_form); }

MLPConfig effective_stage1_net(const ExperimentConfig& c, const ProblemSpec& problem) {
  MLPConfig net = c.stage1_net;
  net.input_dim = problem.n_inputs;
  net.output_dim = problem.n_outputs;
  net.seed = derive_seed(c.seed, "stage1-init");
  net.validate();
  return net;
}

TrainConfig effective_stage1_train(const ExperimentConfig& c) {
  TrainConfig t = c.stage1_train;
  t.seed = c.seed;
  t.validate();
  return t;
}

MLPConfig effective_stage2_net(const ExperimentConfig& c, const ProblemSpec& problem) {
  MLPConfig net = c.stage2_net;
  net.input_dim = problem.n_inputs;
  net.output_dim = problem.n_outputs;
  net.validate();
  return net;
}

Eigen::MatrixXd band_grid(const std::vector<Interval>& domain, const std::vector<std::size_t>& counts) {
  if (counts.size() != domain.size()) throw ConfigError("band_points needs one count per input dimension");
  Eigen::Index total = 1;
  for (std::size_t n : counts) {
    if (n < 2) throw ConfigError("band grid needs at least 2 points per axis");
    total *= static_cast<Eigen::Index>(n);
  }
  const auto dims = static_cast<Eigen::Index>(domain.size());
  Eigen::MatrixXd pts(dims, total);
  for (Eigen::Index j = 0; j < total; ++j) {
    Eigen::Index rest = j;
    for (Eigen::Index d = 0; d < dims; ++d) {
      const auto n = static_cast<Eigen::Index>(counts[static_cast<std::size_t>(d)]);
      const Interval& iv = domain[static_cast<std::size_t>(d)];
      pts(d, j) = iv.lo + iv.width() * static_cast<double>(rest % n) / static_cast<double>(n - 1);
      rest /= n;
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Stage 1 and its cache

namespace {

json stage1_file_json(const Stage1Result& r, const ExperimentConfig& c) {
  json j = stage1_to_json(r);
  j["lv_standard_form"] = c.lv_standard_form;
  return j;
}

fs::path cache_path(const ExperimentConfig& c) {
  const ProblemSpec p = problem_for(c);
  json key{{"preset", c.preset},
           {"lv_standard_form", c.lv_standard_form},
           {"net", effective_stage1_net(c, p)},
           {"train", effective_stage1_train(c)}};
  char name[64];
  std::snprintf(name, sizeof name, "stage1_%s_%016llx.json", c.preset.c_str(),
                static_cast<unsigned long long>(fnv1a64(key.dump())));
  return c.cache_dir / name;
}

}  // namespace

bool stage1_compatible(const json& stored, const ExperimentConfig& c) {
  try {
    const ProblemSpec p = problem_for(c);
    return stored.at("problem").get<std::string>() == c.preset &&
           stored.value("lv_standard_form", false) == c.lv_standard_form &&
           stored.at("net_config").get<MLPConfig>() == effective_stage1_net(c, p) &&
           stored.at("train_config").get<TrainConfig>() == effective_stage1_train(c);
  } catch (const json::exception&) {
    return false;
  }
}

Stage1Result solve_stage1(const ExperimentConfig& c) {
  const ProblemSpec problem = problem_for(c);
  if (!c.cache_dir.empty()) {
    const fs::path path = cache_path(c);
    if (fs::exists(path)) {
      const json stored = read_json(path);
      if (stage1_compatible(stored, c)) return stage1_from_json(stored);
    }
  }
  Stage1Result r = train_deterministic(problem, effective_stage1_net(c, problem), effective_stage1_train(c));
  if (!c.cache_dir.empty()) {
    fs::create_directories(c.cache_dir);
    write_file_atomic(cache_path(c), stage1_file_json(r, c).dump());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bands and artifacts

namespace {

std::vector<std::string> output_suffixes(const ProblemSpec& p) {
  if (p.n_outputs == 1) return {""};
  if (p.n_outputs == 2) return {"_u", "_v"};
  std::vector<std::string> s;
  for (std::size_t o = 0; o < p.n_outputs; ++o) s.push_back("_" + std::to_string(o));
  return s;
}

void append_number(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  line += buf;
}

struct Stage2Output {
  PredictiveBand raw;
  json posterior;
};

Stage2Output fit_stage2(const ExperimentConfig& c, const ProblemSpec& problem, const Stage1Result& s1,
                        const Eigen::MatrixXd& grid) {
  const RegressionData data = make_regression_data(problem, {s1.dataset_points, s1.dataset_values});
  const MLPConfig net = effective_stage2_net(c, problem);
  const LikelihoodSpec like{c.eps};
  const GaussianPrior prior{c.prior_std};
  Stage2Output out;
  switch (c.method) {
    case Method::BBB:
    case Method::Flipout: {
      VariationalTrainConfig vc;
      vc.steps = c.stage2_steps;
      vc.learning_rate = c.stage2_learning_rate;
      vc.rho_init = c.rho_init;
      vc.seed = c.seed;
      const VariationalResult res =
          c.method == Method::BBB ? bbb_train(data, net, like, prior, vc) : flipout_train(data, net, like, prior, vc);
      out.raw = posterior_predictive_mc(res.q, grid, c.n_mc_samples, derive_seed(c.seed, "predictive"));
      out.posterior = variational_to_json(res.q);
      break;
    }
    case Method::NLM: {
      NLMTrainConfig nc;
      nc.epochs = c.stage2_steps;
      nc.learning_rate = c.stage2_learning_rate;
      nc.seed = c.seed;
      nc.include_noise = c.nlm_include_noise;
      const NLMPosterior post = nlm_train(data, net, like, prior, nc);
      out.raw = nlm_band(post, grid);
      out.posterior = nlm_to_json(post);
      break;
    }
    case Method::DER: {
      DERTrainConfig dc;
      dc.epochs = c.stage2_steps;
      dc.learning_rate = c.stage2_learning_rate;
      dc.seed = c.seed;
      dc.lambda = c.der_lambda;
      const DERModel model = der_train(data, net, dc);
      out.raw = der_band(model, grid);
      out.posterior = der_to_json(model);
      break;
    }
  }
  if (!out.raw.mean.allFinite() || !out.raw.std.allFinite()) {
    throw DivergenceError("stage-2 band is not finite", 0, {});
  }
  return out;
}

// Assembles files in a staging directory next to `dest`, then swaps it in.
class StagedDirectory {
 public:
  explicit StagedDirectory(fs::path dest) : dest_(std::move(dest)) {
    if (dest_.has_parent_path()) fs::create_directories(dest_.parent_path());
    staging_ = dest_;
    staging_ += ".staging";
    fs::remove_all(staging_);
    if (!fs::create_directories(staging_)) throw IoError("cannot create " + staging_.string());
  }
  ~StagedDirectory() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  fs::path file(const std::string& name) const { return staging_ / name; }

  void commit() {
    std::error_code ec;
    fs::path old = dest_;
    old += ".old";
    fs::remove_all(old, ec);
    if (fs::exists(dest_)) {
      fs::rename(dest_, old, ec);
      if (ec) throw IoError("cannot replace " + dest_.string());
    }
    fs::rename(staging_, dest_, ec);
    if (ec) throw IoError("cannot move artifacts into " + dest_.string());
    committed_ = true;
    fs::remove_all(old, ec);
  }

 private:
  fs::path dest_;
  fs::path staging_;
  bool committed_ = false;
};

json effective_config_json(const ExperimentConfig& c, const ProblemSpec& problem) {
  json j = config_to_json(c);
  j["stage1_net"] = effective_stage1_net(c, problem);
  j["stage1_train"] = effective_stage1_train(c);
  j["stage2_net"] = effective_stage2_net(c, problem);
  j["derived_seeds"] = {{"stage1_init", derive_seed(c.seed, "stage1-init")},
                        {"collocation", derive_seed(c.seed, "collocation")},
                        {"variational_init", derive_seed(c.seed, "variational-init")},
                        {"weight_noise", derive_seed(c.seed, "weight-noise")},
                        {"flipout_signs", derive_seed(c.seed, "flipout-signs")},
                        {"nlm_init", derive_seed(c.seed, "nlm-init")},
                        {"der_init", derive_seed(c.seed, "der-init")},
                        {"predictive", derive_seed(c.seed, "predictive")}};
  return j;
}

}  // namespace

json report_to_json(const BandReport& r) {
  json ratio = r.inflation_ratio;
  if (std::isinf(r.inflation_ratio)) ratio = "inf";
  return json{{"coverage_k2", r.coverage_k2},
              {"mean_std_train", r.mean_std_train},
              {"mean_std_extrap", r.mean_std_extrap},
              {"inflation_ratio", ratio},
              {"rmse_train", r.rmse_train}};
}

std::string band_csv(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference) {
  if (band.grid.rows() != static_cast<Eigen::Index>(problem.n_inputs)) throw StructuralError("band grid dimension mismatch");
  if (band.mean.rows() != static_cast<Eigen::Index>(problem.n_outputs) || band.mean.cols() != band.grid.cols() ||
      band.std.rows() != band.mean.rows() || band.std.cols() != band.mean.cols() ||
      reference.rows() != band.mean.rows() || reference.cols() != band.mean.cols()) {
    throw StructuralError("band and reference grids do not align");
  }
  const auto suffix = output_suffixes(problem);
  std::string text;
  for (const std::string& name : problem.input_names) text += name + ",";
  for (const std::string& s : suffix) text += "mean" + s + ",std" + s + ",reference" + s + ",";
  text += "in_train_domain\n";
  std::vector<double> point(problem.n_inputs);
  for (Eigen::Index j = 0; j < band.grid.cols(); ++j) {
    std::string line;
    for (Eigen::Index d = 0; d < band.grid.rows(); ++d) {
      point[static_cast<std::size_t>(d)] = band.grid(d, j);
      append_number(line, band.grid(d, j));
      line += ',';
    }
    for (Eigen::Index o = 0; o < band.mean.rows(); ++o) {
      append_number(line, band.mean(o, j));
      line += ',';
      append_number(line, band.std(o, j));
      line += ',';
      append_number(line, reference(o, j));
      line += ',';
    }
    line += problem.in_train_domain(point) ? "1\n" : "0\n";
    text += line;
  }
  return text;
}

void emit_band_csv(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference,
                   const fs::path& path) {
  write_file_atomic(path, band_csv(problem, band, reference));
}

BandReport report_from_band_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty band file " + path.string());
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  std::vector<std::size_t> mean_col, std_col, ref_col;
  std::size_t flag_col = header.size();
  for (std::size_t k = 0; k < header.size(); ++k) {
    const std::string& h = header[k];
    if (h.rfind("mean", 0) == 0) mean_col.push_back(k);
    if (h.rfind("std", 0) == 0) std_col.push_back(k);
    if (h.rfind("reference", 0) == 0) ref_col.push_back(k);
    if (h == "in_train_domain") flag_col = k;
  }
  if (mean_col.empty() || mean_col.size() != std_col.size() || mean_col.size() != ref_col.size() ||
      flag_col == header.size()) {
    throw IoError("band file " + path.string() + " lacks the expected columns");
  }

  std::vector<double> m_in, s_in, r_in, s_out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("bad number '" + cell + "' in " + path.string());
      }
    }
    if (row.size() != header.size()) throw IoError("ragged row in " + path.string());
    const bool train = row[flag_col] != 0.0;
    for (std::size_t o = 0; o < mean_col.size(); ++o) {
      if (train) {
        m_in.push_back(row[mean_col[o]]);
        s_in.push_back(row[std_col[o]]);
        r_in.push_back(row[ref_col[o]]);
      } else {
        s_out.push_back(row[std_col[o]]);
      }
    }
  }
  if (m_in.empty() || s_out.empty()) throw StructuralError("band must cover both the training and extrapolation regions");
  const auto n_in = static_cast<Eigen::Index>(m_in.size());
  const Eigen::Map<const Eigen::RowVectorXd> mean(m_in.data(), n_in), std(s_in.data(), n_in), ref(r_in.data(), n_in);
  BandReport r;
  r.coverage_k2 = coverage(mean, std, ref, 2.0);
  r.mean_std_train = std.mean();
  r.mean_std_extrap = Eigen::Map<const Eigen::VectorXd>(s_out.data(), static_cast<Eigen::Index>(s_out.size())).mean();
  r.inflation_ratio = r.mean_std_train > 0.0 ? r.mean_std_extrap / r.mean_std_train : std::numeric_limits<double>::infinity();
  r.rmse_train = rmse(m_in, r_in);
  return r;
}

UqResult fit_uq(const ExperimentConfig& c, const Stage1Result& stage1) {
  c.validate();
  const ProblemSpec problem = problem_for(c);
  if (stage1.problem != problem.name) throw ConfigError("stage-1 solution belongs to preset '" + stage1.problem + "'");
  const Eigen::MatrixXd grid = band_grid(problem.extrap_domain, c.band_points);
  UqResult r;
  r.reference = reference_solution(problem, grid);
  Stage2Output fit = fit_stage2(c, problem, stage1, grid);
  r.band = enforce_predictive(fit.raw, problem.transform);
  r.report = band_report(problem, r.band, r.reference);
  r.posterior = std::move(fit.posterior);
  r.posterior["method"] = to_string(c.method);
  return r;
}

RunArtifacts run_uq(const ExperimentConfig& c, const Stage1Result& stage1) {
  const UqResult fit = fit_uq(c, stage1);
  const ProblemSpec problem = problem_for(c);
  const PredictiveBand& band = fit.band;

  RunArtifacts a;
  a.report = fit.report;

  StagedDirectory dir(c.output_dir);
  write_file_atomic(dir.file("band.csv"), band_csv(problem, band, fit.reference));
  write_file_atomic(dir.file("stage1.json"), stage1_file_json(stage1, c).dump());
  write_file_atomic(dir.file("posterior.json"), fit.posterior.dump());
  const json report{{"preset", c.preset}, {"method", to_string(c.method)}, {"seed", c.seed},
                    {"band_points", band.grid.cols()}, {"metrics", report_to_json(a.report)}};
  write_file_atomic(dir.file("report.json"), report.dump(2) + "\n");
  write_file_atomic(dir.file("config.json"), effective_config_json(c, problem).dump(2) + "\n");
  dir.commit();

  a.band_file = c.output_dir / "band.csv";
  a.stage1_file = c.output_dir / "stage1.json";
  a.posterior_file = c.output_dir / "posterior.json";
  a.report_file = c.output_dir / "report.json";
  a.config_file = c.output_dir / "config.json";
  return a;
}

RunArtifacts run(const ExperimentConfig& c) {
  c.validate();
  return run_uq(c, solve_stage1(c));
}

fs::path run_solve(const ExperimentConfig& c) {
  c.validate();
  const ProblemSpec problem = problem_for(c);
  const Stage1Result r = solve_stage1(c);
  StagedDirectory dir(c.output_dir);
  write_file_atomic(dir.file("stage1.json"), stage1_file_json(r, c).dump());
  write_file_atomic(dir.file("config.json"), effective_config_json(c, problem).dump(2) + "\n");
  dir.commit();
  return c.output_dir / "stage1.json";
}

}  // namespace deuq
