#include <cmath>

#include "deuq/adam.hpp"
#include "deuq/rng.hpp"
#include "deuq/uq.hpp"

namespace deuq {

LinearPosterior nlm_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double eps,
                        double prior_std) {
  if (!(eps > 0.0) || !(prior_std > 0.0)) throw ConfigError("nlm_fit needs positive eps and prior_std");
  if (features.cols() < 1) throw StructuralError("nlm_fit needs at least one feature");
  if (features.rows() != targets.size()) throw StructuralError("feature rows do not match the targets");
  if (!features.allFinite() || !targets.allFinite()) throw StructuralError("non-finite features or targets");

  const Eigen::Index d = features.cols();
  const double inv_noise = 1.0 / (eps * eps);
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(d, d) / (prior_std * prior_std);
  precision.noalias() += inv_noise * features.transpose() * features;
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw DomainError("posterior precision is not positive definite");

  LinearPosterior post;
  post.cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
  post.cov = (0.5 * (post.cov + post.cov.transpose())).eval();
  post.mean = llt.solve(inv_noise * features.transpose() * targets);
  return post;
}

std::pair<double, double> nlm_predict(const LinearPosterior& post, const Eigen::VectorXd& phi, double noise_var) {
  if (phi.size() != post.mean.size()) throw StructuralError("feature length does not match the posterior");
  const double mean = phi.dot(post.mean);
  const double var = std::max(0.0, phi.dot(post.cov * phi)) + noise_var;
  return {mean, std::sqrt(var)};
}

Eigen::MatrixXd NLMPosterior::features(const Eigen::MatrixXd& points) const {
  const Eigen::MatrixXd h = hidden_features(feature_net, feature_params, points);
  Eigen::MatrixXd phi(h.rows() + 1, h.cols());
  phi.topRows(h.rows()) = h;
  phi.row(h.rows()).setOnes();
  return phi;
}

NLMPosterior nlm_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                       const GaussianPrior& prior, const NLMTrainConfig& config,
                       std::vector<LossRecord>* loss_history) {
  like.validate();
  prior.validate();
  net.validate();
  if (static_cast<std::size_t>(data.targets.rows()) != net.output_dim) {
    throw StructuralError("network outputs do not match the dataset");
  }

  NLMPosterior post;
  post.feature_net = net;
  post.feature_net.seed = derive_seed(config.seed, "nlm-init");
  post.eps = like.eps;
  post.prior_std = prior.std;
  post.include_noise = config.include_noise;

  MLPParams params = init(post.feature_net);
  Eigen::VectorXd flat = params.flatten();
  Adam adam(flat.size(), AdamConfig{config.learning_rate});
  const JetBatch input = JetBatch::seeded(data.points, std::nullopt);
  const double inv_n = data.points.cols() > 0 ? 1.0 / static_cast<double>(data.points.cols()) : 0.0;
  MLPTrace trace;
  for (std::size_t epoch = 0; epoch < config.epochs && data.points.cols() > 0; ++epoch) {
    const JetBatch& out = trace.forward(post.feature_net, params, input, false);
    const Eigen::MatrixXd resid = data.targets - (data.A + data.B.cwiseProduct(out.value));
    const double loss = resid.squaredNorm() * inv_n;
    if (!std::isfinite(loss)) {
      throw DivergenceError("feature network training diverged at epoch " + std::to_string(epoch), epoch,
                            std::vector<double>(flat.data(), flat.data() + flat.size()));
    }
    if (loss_history) loss_history->push_back({epoch, loss});
    JetBatch adj;
    adj.value = -2.0 * inv_n * resid.cwiseProduct(data.B);
    adam.step(flat, trace.backward(params, adj));
    params = MLPParams::unflatten(post.feature_net, std::span<const double>(flat.data(), flat.size()));
  }
  post.feature_params = params;

  // u~ - A = B * (phi^T w): regress on the transformed design.
  const Eigen::MatrixXd phi = post.features(data.points);
  for (Eigen::Index o = 0; o < data.targets.rows(); ++o) {
    const Eigen::MatrixXd design = (phi.array().rowwise() * data.B.row(o).array()).matrix().transpose();
    const Eigen::VectorXd y = (data.targets.row(o) - data.A.row(o)).transpose();
    post.last_layer.push_back(nlm_fit(design, y, like.eps, prior.std));
  }
  return post;
}

PredictiveBand nlm_band(const NLMPosterior& post, const Eigen::MatrixXd& grid) {
  PredictiveBand band;
  band.grid = grid;
  const Eigen::MatrixXd phi = post.features(grid);
  const auto n_out = static_cast<Eigen::Index>(post.last_layer.size());
  band.mean.resize(n_out, grid.cols());
  band.std.resize(n_out, grid.cols());
  const double noise_var = post.include_noise ? post.eps * post.eps : 0.0;
  for (Eigen::Index o = 0; o < n_out; ++o) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const auto [m, s] = nlm_predict(post.last_layer[static_cast<std::size_t>(o)], phi.col(j), noise_var);
      band.mean(o, j) = m;
      band.std(o, j) = s;
    }
  }
  return band;
}

}  // namespace deuq
