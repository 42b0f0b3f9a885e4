#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "deuq/uq.hpp"

namespace deuq::oracle {

struct GridMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Moments of exp(-|y - Phi w|^2 / (2 eps^2) - |w|^2 / (2 s^2)) by brute-force
// summation over a regular grid on [-half_width, half_width]^d, d in {1, 2}.
inline GridMoments grid_posterior(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double eps,
                                  double prior_std, double half_width, int n) {
  const Eigen::Index d = phi.cols();
  const double h = 2.0 * half_width / (n - 1);
  auto log_density = [&](const Eigen::VectorXd& w) {
    return -0.5 * (y - phi * w).squaredNorm() / (eps * eps) - 0.5 * w.squaredNorm() / (prior_std * prior_std);
  };
  const int n2 = d == 2 ? n : 1;
  Eigen::MatrixXd logp(n, n2);
  double peak = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n2; ++j) {
      w[0] = -half_width + h * i;
      if (d == 2) w[1] = -half_width + h * j;
      logp(i, j) = log_density(w);
      peak = std::max(peak, logp(i, j));
    }
  }
  double z = 0.0;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n2; ++j) {
      w[0] = -half_width + h * i;
      if (d == 2) w[1] = -half_width + h * j;
      const double p = std::exp(logp(i, j) - peak);
      z += p;
      m1 += p * w;
      m2 += p * w * w.transpose();
    }
  }
  GridMoments out;
  out.mean = m1 / z;
  out.cov = m2 / z - out.mean * out.mean.transpose();
  return out;
}

// A variational posterior whose only uncertain parameters are those of the
// final layer, each with its own std. Everything else has sigma = 0.
inline VariationalParams last_layer_only(const MLPConfig& net, const Eigen::VectorXd& last_sigma) {
  VariationalParams q = init_variational(net, -1000.0);
  const Eigen::Index k = last_sigma.size();
  for (Eigen::Index i = 0; i < k; ++i) {
    q.rho[q.rho.size() - k + i] = std::log(std::expm1(last_sigma[i]));
  }
  return q;
}

// Analytic predictive std of last_layer_only(net, sigma) at each point:
// the final layer (weights then bias) is Gaussian with diagonal covariance,
// so the output is phi^T w with phi = [last hidden; 1].
inline Eigen::VectorXd last_layer_analytic_std(const VariationalParams& q, const Eigen::VectorXd& last_sigma,
                                               const Eigen::MatrixXd& grid) {
  const MLPParams mean = MLPParams::unflatten(q.net, std::span<const double>(q.mu.data(), q.size()));
  Eigen::MatrixXd phi(last_sigma.size(), grid.cols());
  phi.topRows(last_sigma.size() - 1) = hidden_features(q.net, mean, grid);
  phi.bottomRows(1).setOnes();
  LinearPosterior post{q.mu.tail(last_sigma.size()), last_sigma.cwiseProduct(last_sigma).asDiagonal()};
  Eigen::VectorXd out(grid.cols());
  for (Eigen::Index j = 0; j < grid.cols(); ++j) out[j] = nlm_predict(post, phi.col(j)).second;
  return out;
}

}  // namespace deuq::oracle
