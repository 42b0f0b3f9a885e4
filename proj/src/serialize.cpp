#include "deuq/serialize.hpp"

#include <fstream>
#include <sstream>

namespace deuq {

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  // One array per column (a point).
  json out = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    json col = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) col.push_back(m(r, c));
    out.push_back(std::move(col));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    if (j[c].size() != static_cast<std::size_t>(rows)) throw IoError("matrix column has the wrong length");
    for (Eigen::Index r = 0; r < rows; ++r) m(r, static_cast<Eigen::Index>(c)) = j[c][static_cast<std::size_t>(r)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MLPParams params_from_json(const MLPConfig& net, const json& j) {
  const auto flat = j.get<std::vector<double>>();
  return MLPParams::unflatten(net, flat);
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const MLPConfig& c) {
  j = json{{"input_dim", c.input_dim},
           {"output_dim", c.output_dim},
           {"hidden_sizes", c.hidden_sizes},
           {"activation", to_string(c.activation)},
           {"seed", c.seed}};
}

void from_json(const json& j, MLPConfig& c) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"n_collocation", c.n_collocation}, {"sampler", to_string(c.sampler)},
           {"epochs", c.epochs},               {"learning_rate", c.learning_rate},
           {"optimizer", "adam"},              {"seed", c.seed},
           {"tolerance", c.tolerance},         {"dataset_points", c.dataset_points}};
}

void from_json(const json& j, TrainConfig& c) {
  c.n_collocation = j.value("n_collocation", c.n_collocation);
  if (j.contains("sampler")) c.sampler = sampler_from_string(j.at("sampler").get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.value("optimizer", std::string("adam")) != "adam") throw ConfigError("only the adam optimizer is supported");
  c.seed = j.value("seed", c.seed);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.dataset_points = j.value("dataset_points", c.dataset_points);
}

json stage1_to_json(const Stage1Result& r) {
  json history = json::array();
  for (const LossRecord& rec : r.loss_history) history.push_back({rec.epoch, rec.loss});
  return json{{"problem", r.problem},
              {"net_config", r.net},
              {"train_config", r.train},
              {"flat_params", vector_to_json(r.params.flatten())},
              {"loss_history", std::move(history)},
              {"dataset", {{"points", matrix_to_json(r.dataset_points)}, {"values", matrix_to_json(r.dataset_values)}}}};
}

Stage1Result stage1_from_json(const json& j) {
  return guarded("stage-1 file", [&] {
    Stage1Result r;
    r.problem = j.at("problem").get<std::string>();
    r.net = j.at("net_config").get<MLPConfig>();
    r.net.validate();
    r.train = j.at("train_config").get<TrainConfig>();
    r.params = params_from_json(r.net, j.at("flat_params"));
    for (const json& rec : j.at("loss_history")) r.loss_history.push_back({rec.at(0).get<std::size_t>(), rec.at(1).get<double>()});
    const json& d = j.at("dataset");
    r.dataset_points = matrix_from_json(d.at("points"), static_cast<Eigen::Index>(r.net.input_dim));
    r.dataset_values = matrix_from_json(d.at("values"), static_cast<Eigen::Index>(r.net.output_dim));
    return r;
  });
}

json variational_to_json(const VariationalParams& q) {
  return json{{"net_config", q.net}, {"mu", vector_to_json(q.mu)}, {"rho", vector_to_json(q.rho)}};
}

VariationalParams variational_from_json(const json& j) {
  return guarded("variational posterior", [&] {
    VariationalParams q;
    q.net = j.at("net_config").get<MLPConfig>();
    q.net.validate();
    q.mu = vector_from_json(j.at("mu"));
    q.rho = vector_from_json(j.at("rho"));
    if (q.size() != q.net.param_count() || q.rho.size() != q.mu.size()) {
      throw IoError("variational posterior size does not match its network");
    }
    return q;
  });
}

json nlm_to_json(const NLMPosterior& post) {
  json layers = json::array();
  for (const LinearPosterior& lp : post.last_layer) {
    layers.push_back({{"posterior_mean", vector_to_json(lp.mean)}, {"posterior_cov", matrix_to_json(lp.cov)}});
  }
  return json{{"net_config", post.feature_net},
              {"flat_params", vector_to_json(post.feature_params.flatten())},
              {"last_layer", std::move(layers)},
              {"eps", post.eps},
              {"prior_std", post.prior_std},
              {"include_noise", post.include_noise}};
}

NLMPosterior nlm_from_json(const json& j) {
  return guarded("NLM posterior", [&] {
    NLMPosterior post;
    post.feature_net = j.at("net_config").get<MLPConfig>();
    post.feature_net.validate();
    post.feature_params = params_from_json(post.feature_net, j.at("flat_params"));
    for (const json& lp : j.at("last_layer")) {
      LinearPosterior p;
      p.mean = vector_from_json(lp.at("posterior_mean"));
      p.cov = matrix_from_json(lp.at("posterior_cov"), p.mean.size());
      post.last_layer.push_back(std::move(p));
    }
    post.eps = j.at("eps").get<double>();
    post.prior_std = j.at("prior_std").get<double>();
    post.include_noise = j.value("include_noise", false);
    return post;
  });
}

json der_to_json(const DERModel& model) {
  return json{{"net_config", model.net}, {"flat_params", vector_to_json(model.params.flatten())}, {"lambda", model.lambda}};
}

DERModel der_from_json(const json& j) {
  return guarded("DER model", [&] {
    DERModel m;
    m.net = j.at("net_config").get<MLPConfig>();
    m.net.validate();
    m.params = params_from_json(m.net, j.at("flat_params"));
    m.lambda = j.at("lambda").get<double>();
    return m;
  });
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace deuq
