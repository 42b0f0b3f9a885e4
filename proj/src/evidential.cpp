#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "deuq/adam.hpp"
#include "deuq/rng.hpp"
#include "deuq/uq.hpp"

namespace deuq {

EvidentialOutput der_head(std::span<const double> raw) {
  if (raw.size() != 4) throw StructuralError("evidential head needs four raw outputs");
  return {raw[0], softplus(raw[1]), 1.0 + softplus(raw[2]), softplus(raw[3])};
}

double der_nll(const EvidentialOutput& out, double target) {
  const double r = target - out.gamma;
  const double omega = 2.0 * out.beta * (1.0 + out.nu);
  return 0.5 * std::log(std::numbers::pi / out.nu) - out.alpha * std::log(omega) +
         (out.alpha + 0.5) * std::log(r * r * out.nu + omega) + std::lgamma(out.alpha) -
         std::lgamma(out.alpha + 0.5);
}

double der_loss(const EvidentialOutput& out, double target, double lambda) {
  return der_nll(out, target) + lambda * std::abs(target - out.gamma) * (2.0 * out.nu + out.alpha);
}

std::array<double, 4> der_loss_gradient(const EvidentialOutput& out, double target, double lambda) {
  const double r = target - out.gamma;
  const double omega = 2.0 * out.beta * (1.0 + out.nu);
  const double denom = r * r * out.nu + omega;
  const double a_half = out.alpha + 0.5;
  const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  const double evidence = 2.0 * out.nu + out.alpha;

  std::array<double, 4> g{};
  g[0] = -a_half * 2.0 * r * out.nu / denom - lambda * sign * evidence;
  g[1] = -0.5 / out.nu - out.alpha * 2.0 * out.beta / omega + a_half * (r * r + 2.0 * out.beta) / denom +
         2.0 * lambda * std::abs(r);
  g[2] = -std::log(omega) + std::log(denom) + boost::math::digamma(out.alpha) -
         boost::math::digamma(a_half) + lambda * std::abs(r);
  g[3] = -out.alpha / out.beta + a_half * 2.0 * (1.0 + out.nu) / denom;
  return g;
}

std::pair<double, double> der_predictive(const EvidentialOutput& out) {
  if (!(out.alpha > 1.0)) throw DomainError("evidential variance needs alpha > 1");
  const double var = out.beta * (1.0 + out.nu) / (out.nu * (out.alpha - 1.0));
  return {out.gamma, std::sqrt(var)};
}

DERModel der_train(const RegressionData& data, const MLPConfig& hidden, const DERTrainConfig& config,
                   std::vector<LossRecord>* loss_history) {
  if (!(config.lambda >= 0.0)) throw ConfigError("DER lambda must be nonnegative");
  const auto n_out = data.targets.rows();
  DERModel model;
  model.lambda = config.lambda;
  model.net = hidden;
  model.net.output_dim = 4 * static_cast<std::size_t>(n_out);
  model.net.seed = derive_seed(config.seed, "der-init");
  model.net.validate();

  // Points where B vanishes pin the output exactly and carry no information.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < data.points.cols(); ++j) {
    if ((data.B.col(j).array() != 0.0).all()) keep.push_back(j);
  }
  if (keep.empty()) throw ConfigError("DER training needs at least one point away from the conditions");
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd pts(data.points.rows(), n), tgt(n_out, n), A(n_out, n), B(n_out, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    pts.col(k) = data.points.col(keep[static_cast<std::size_t>(k)]);
    tgt.col(k) = data.targets.col(keep[static_cast<std::size_t>(k)]);
    A.col(k) = data.A.col(keep[static_cast<std::size_t>(k)]);
    B.col(k) = data.B.col(keep[static_cast<std::size_t>(k)]);
  }

  MLPParams params = init(model.net);
  Eigen::VectorXd flat = params.flatten();
  Adam adam(flat.size(), AdamConfig{config.learning_rate});
  const JetBatch input = JetBatch::seeded(pts, std::nullopt);
  const double inv_n = 1.0 / static_cast<double>(n);
  MLPTrace trace;
  JetBatch adj;
  adj.value.resize(static_cast<Eigen::Index>(model.net.output_dim), n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::MatrixXd& raw = trace.forward(model.net, params, input, false).value;
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index o = 0; o < n_out; ++o) {
        const double r[4] = {raw(4 * o, j), raw(4 * o + 1, j), raw(4 * o + 2, j), raw(4 * o + 3, j)};
        const EvidentialOutput head = der_head(r);
        const double b = B(o, j);
        const EvidentialOutput pushed{A(o, j) + b * head.gamma, head.nu, head.alpha, b * b * head.beta};
        loss += der_loss(pushed, tgt(o, j), config.lambda);
        const std::array<double, 4> g = der_loss_gradient(pushed, tgt(o, j), config.lambda);
        adj.value(4 * o, j) = inv_n * g[0] * b;
        adj.value(4 * o + 1, j) = inv_n * g[1] * sigmoid(r[1]);
        adj.value(4 * o + 2, j) = inv_n * g[2] * sigmoid(r[2]);
        adj.value(4 * o + 3, j) = inv_n * g[3] * b * b * sigmoid(r[3]);
      }
    }
    loss *= inv_n;
    if (!std::isfinite(loss) || !adj.value.allFinite()) {
      throw DivergenceError("DER training diverged at epoch " + std::to_string(epoch), epoch,
                            std::vector<double>(flat.data(), flat.data() + flat.size()));
    }
    if (loss_history) loss_history->push_back({epoch, loss});
    adam.step(flat, trace.backward(params, adj));
    params = MLPParams::unflatten(model.net, std::span<const double>(flat.data(), flat.size()));
  }
  model.params = std::move(params);
  return model;
}

PredictiveBand der_band(const DERModel& model, const Eigen::MatrixXd& grid) {
  PredictiveBand band;
  band.grid = grid;
  const Eigen::MatrixXd raw = evaluate(model.net, model.params, grid);
  const Eigen::Index n_out = raw.rows() / 4;
  band.mean.resize(n_out, grid.cols());
  band.std.resize(n_out, grid.cols());
  for (Eigen::Index j = 0; j < grid.cols(); ++j) {
    for (Eigen::Index o = 0; o < n_out; ++o) {
      const double r[4] = {raw(4 * o, j), raw(4 * o + 1, j), raw(4 * o + 2, j), raw(4 * o + 3, j)};
      const auto [m, s] = der_predictive(der_head(r));
      band.mean(o, j) = m;
      band.std(o, j) = s;
    }
  }
  return band;
}

}  // namespace deuq
