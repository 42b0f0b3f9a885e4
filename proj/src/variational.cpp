#include <cmath>
#include <numbers>

#include "deuq/adam.hpp"
#include "deuq/rng.hpp"
#include "deuq/uq.hpp"

namespace deuq {

void LikelihoodSpec::validate() const {
  if (!(eps > 0.0)) throw ConfigError("likelihood eps must be positive");
}

void GaussianPrior::validate() const {
  if (!(std > 0.0)) throw ConfigError("prior std must be positive");
}

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

RegressionData make_regression_data(const ProblemSpec& problem, const Dataset& data) {
  RegressionData r;
  r.points = data.points;
  r.targets = data.values;
  problem.transform.values(data.points, r.A, r.B);
  return r;
}

Eigen::VectorXd VariationalParams::sigma() const { return rho.unaryExpr([](double r) { return softplus(r); }); }

VariationalParams init_variational(const MLPConfig& net, double rho_init) {
  VariationalParams q;
  q.net = net;
  q.mu = init(net).flatten();
  q.rho = Eigen::VectorXd::Constant(q.mu.size(), rho_init);
  return q;
}

double kl_gaussian_diag(const VariationalParams& q, const GaussianPrior& prior) {
  const double s2 = prior.std * prior.std;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < q.mu.size(); ++i) {
    const double sigma = softplus(q.rho[i]);
    const double ratio = sigma * sigma / s2;
    kl += 0.5 * (ratio + q.mu[i] * q.mu[i] / s2 - 1.0 - std::log(ratio));
  }
  return kl;
}

MLPParams bbb_sample_weights(const VariationalParams& q, std::span<const double> noise) {
  if (noise.size() != q.size()) throw StructuralError("noise length does not match the parameter count");
  const Eigen::Map<const Eigen::VectorXd> eps(noise.data(), static_cast<Eigen::Index>(noise.size()));
  const Eigen::VectorXd w = q.mu + q.sigma().cwiseProduct(eps);
  return MLPParams::unflatten(q.net, std::span<const double>(w.data(), w.size()));
}

MLPParams flipout_perturb(const VariationalParams& q, std::span<const double> shared_noise,
                          std::span<const LayerSigns> signs) {
  if (shared_noise.size() != q.size()) throw StructuralError("noise length does not match the parameter count");
  const Eigen::Map<const Eigen::VectorXd> eps(shared_noise.data(), static_cast<Eigen::Index>(shared_noise.size()));
  const Eigen::VectorXd delta_flat = q.sigma().cwiseProduct(eps);
  MLPParams w = MLPParams::unflatten(q.net, std::span<const double>(q.mu.data(), q.size()));
  const MLPParams delta = MLPParams::unflatten(q.net, std::span<const double>(delta_flat.data(), delta_flat.size()));
  if (signs.size() != w.layers.size()) throw StructuralError("one sign pair per layer is required");
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const LayerSigns& sg = signs[l];
    if (sg.r.size() != w.layers[l].weight.rows() || sg.s.size() != w.layers[l].weight.cols()) {
      throw StructuralError("sign vector length does not match the layer shape");
    }
    for (const Eigen::VectorXd* v : {&sg.r, &sg.s}) {
      for (double e : *v) {
        if (e != 1.0 && e != -1.0) throw StructuralError("sign entries must be +1 or -1");
      }
    }
    w.layers[l].weight += delta.layers[l].weight.cwiseProduct(sg.r * sg.s.transpose());
    w.layers[l].bias += delta.layers[l].bias;
  }
  return w;
}

namespace {

Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& z) {
  if (a == Activation::Tanh) return z.tanh();
  return z.sin();
}

Eigen::ArrayXXd activate_d1(Activation a, const Eigen::ArrayXXd& z) {
  if (a == Activation::Tanh) return 1.0 - z.tanh().square();
  return z.cos();
}

void append_layer(Eigen::VectorXd& flat, Eigen::Index& k, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) flat[k++] = w(r, c);
  }
  flat.segment(k, b.size()) = b;
  k += b.size();
}

}  // namespace

VariationalGradient variational_data_gradient(const RegressionData& data, const VariationalParams& q,
                                              const LikelihoodSpec& like, std::span<const double> noise,
                                              std::span<const Eigen::MatrixXd> r_signs,
                                              std::span<const Eigen::MatrixXd> s_signs) {
  if (noise.size() != q.size()) throw StructuralError("noise length does not match the parameter count");
  const Eigen::Map<const Eigen::VectorXd> eps(noise.data(), static_cast<Eigen::Index>(noise.size()));
  const Eigen::VectorXd sig = q.sigma();
  const Eigen::VectorXd delta_flat = sig.cwiseProduct(eps);
  const MLPParams mu = MLPParams::unflatten(q.net, std::span<const double>(q.mu.data(), q.size()));
  const MLPParams delta = MLPParams::unflatten(q.net, std::span<const double>(delta_flat.data(), delta_flat.size()));
  const std::size_t n_layers = mu.layers.size();
  if (r_signs.size() != n_layers || s_signs.size() != n_layers) throw StructuralError("sign matrices per layer required");

  std::vector<Eigen::MatrixXd> xs, sxs, zs;
  Eigen::MatrixXd x = data.points;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& m = mu.layers[l];
    const DenseLayer& d = delta.layers[l];
    Eigen::MatrixXd sx = s_signs[l].cwiseProduct(x);
    Eigen::MatrixXd z = m.weight * x + r_signs[l].cwiseProduct(d.weight * sx);
    z.colwise() += m.bias + d.bias;
    xs.push_back(x);
    sxs.push_back(std::move(sx));
    if (l + 1 < n_layers) x = activate(q.net.activation, z.array()).matrix();
    zs.push_back(std::move(z));
  }

  const double inv_var = 1.0 / (like.eps * like.eps);
  const Eigen::MatrixXd resid = data.targets - (data.A + data.B.cwiseProduct(zs.back()));
  VariationalGradient out;
  const double count = static_cast<double>(resid.size());
  out.nll = 0.5 * inv_var * resid.squaredNorm() + count * (std::log(like.eps) + 0.5 * std::log(2.0 * std::numbers::pi));

  std::vector<Eigen::MatrixXd> g_mu_w(n_layers), g_delta_w(n_layers);
  std::vector<Eigen::VectorXd> g_b(n_layers);
  Eigen::MatrixXd zbar = -inv_var * resid.cwiseProduct(data.B);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Eigen::MatrixXd zr = zbar.cwiseProduct(r_signs[l]);
    g_mu_w[l] = zbar * xs[l].transpose();
    g_delta_w[l] = zr * sxs[l].transpose();
    g_b[l] = zbar.rowwise().sum();
    if (l == 0) break;
    const Eigen::MatrixXd xbar =
        mu.layers[l].weight.transpose() * zbar + s_signs[l].cwiseProduct(delta.layers[l].weight.transpose() * zr);
    zbar = xbar.cwiseProduct(activate_d1(q.net.activation, zs[l - 1].array()).matrix());
  }

  out.mu.resize(static_cast<Eigen::Index>(q.size()));
  Eigen::VectorXd g_delta(static_cast<Eigen::Index>(q.size()));
  Eigen::Index km = 0, kd = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    append_layer(out.mu, km, g_mu_w[l], g_b[l]);
    append_layer(g_delta, kd, g_delta_w[l], g_b[l]);
  }
  out.rho = g_delta.cwiseProduct(eps).cwiseProduct(q.rho.unaryExpr([](double r) { return sigmoid(r); }));
  return out;
}

namespace {

VariationalResult variational_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                                    const GaussianPrior& prior, const VariationalTrainConfig& config, bool flipout) {
  like.validate();
  prior.validate();
  net.validate();
  if (data.points.cols() == 0) throw ConfigError("variational training needs a nonempty dataset");
  if (static_cast<std::size_t>(data.targets.rows()) != net.output_dim) {
    throw StructuralError("network outputs do not match the dataset");
  }

  MLPConfig init_net = net;
  init_net.seed = derive_seed(config.seed, "variational-init");
  VariationalResult result;
  result.q = init_variational(init_net, config.rho_init);
  VariationalParams& q = result.q;

  Rng noise_rng(derive_seed(config.seed, "weight-noise"));
  Rng sign_rng(derive_seed(config.seed, "flipout-signs"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  const auto widths = net.widths();
  const Eigen::Index n = data.points.cols();
  std::vector<Eigen::MatrixXd> r_signs, s_signs;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    r_signs.push_back(Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(widths[l + 1]), n));
    s_signs.push_back(Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(widths[l]), n));
  }
  const bool random_signs = flipout && !config.force_unit_signs;

  const Eigen::Index P = static_cast<Eigen::Index>(q.size());
  Eigen::VectorXd theta(2 * P);
  theta << q.mu, q.rho;
  Adam adam(theta.size(), AdamConfig{config.learning_rate});
  std::vector<double> noise(q.size());
  const double s2 = prior.std * prior.std;

  for (std::size_t step = 0; step < config.steps; ++step) {
    for (double& e : noise) e = normal(noise_rng);
    if (random_signs) {
      for (auto* set : {&r_signs, &s_signs}) {
        for (Eigen::MatrixXd& m : *set) m = m.unaryExpr([&](double) { return coin(sign_rng) ? 1.0 : -1.0; });
      }
    }
    const VariationalGradient g = variational_data_gradient(data, q, like, noise, r_signs, s_signs);
    const double kl = kl_gaussian_diag(q, prior);
    const double loss = g.nll + kl;
    if (!std::isfinite(loss) || !g.mu.allFinite() || !g.rho.allFinite()) {
      throw DivergenceError("variational training diverged at step " + std::to_string(step), step,
                            std::vector<double>(q.mu.data(), q.mu.data() + P));
    }
    result.loss_history.push_back({step, loss});
    result.kl_history.push_back(kl);

    Eigen::VectorXd grad(2 * P);
    for (Eigen::Index i = 0; i < P; ++i) {
      const double sigma = softplus(q.rho[i]);
      grad[i] = g.mu[i] + q.mu[i] / s2;
      grad[P + i] = g.rho[i] + (sigma / s2 - 1.0 / sigma) * sigmoid(q.rho[i]);
    }
    adam.step(theta, grad);
    q.mu = theta.head(P);
    q.rho = theta.tail(P);
  }
  return result;
}

}  // namespace

VariationalResult bbb_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                            const GaussianPrior& prior, const VariationalTrainConfig& config) {
  return variational_train(data, net, like, prior, config, false);
}

VariationalResult flipout_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                                const GaussianPrior& prior, const VariationalTrainConfig& config) {
  return variational_train(data, net, like, prior, config, true);
}

}  // namespace deuq
