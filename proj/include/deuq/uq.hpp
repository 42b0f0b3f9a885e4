#pragma once

// Probabilistic regression on the deterministic solve. Every method models
// the raw (pre-enforcement) output u_raw and is fitted through the transform:
// the dataset value u~_N(x) is explained by A(x) + B(x) * u_raw(x). Bands are
// produced for u_raw and then mapped through the same transform.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "deuq/mlp.hpp"
#include "deuq/problems.hpp"
#include "deuq/stage1.hpp"

namespace deuq {

// Fixed observation standard deviation of the Gaussian likelihood.
struct LikelihoodSpec {
  double eps = 1e-2;
  void validate() const;
};

// Zero-mean Gaussian prior on every weight and bias.
struct GaussianPrior {
  double std = 1.0;
  void validate() const;
};

// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);
inline double softplus_sigma(double rho) { return softplus(rho); }

// Regression targets with the transform evaluated at every point.
struct RegressionData {
  Eigen::MatrixXd points;   // dims x n
  Eigen::MatrixXd targets;  // outputs x n
  Eigen::MatrixXd A;        // outputs x n
  Eigen::MatrixXd B;        // outputs x n
};

RegressionData make_regression_data(const ProblemSpec& problem, const Dataset& data);

// ---------------------------------------------------------------------------
// Variational posterior (Bayes by Backprop and Flipout)

// Factorized Gaussian over the flat parameter vector; sigma = softplus(rho).
struct VariationalParams {
  MLPConfig net;
  Eigen::VectorXd mu;
  Eigen::VectorXd rho;

  Eigen::VectorXd sigma() const;
  std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
};

// mu from the network initializer, rho constant.
VariationalParams init_variational(const MLPConfig& net, double rho_init);

// Sum over parameters of KL(N(mu, sigma^2) || N(0, prior.std^2)).
double kl_gaussian_diag(const VariationalParams& q, const GaussianPrior& prior);

// w = mu + sigma(rho) * noise. Throws StructuralError on a length mismatch.
MLPParams bbb_sample_weights(const VariationalParams& q, std::span<const double> noise);

// Rank-one sign pattern for one layer: the perturbation of weight (i, j) is
// multiplied by r[i] * s[j].
struct LayerSigns {
  Eigen::VectorXd r;  // output units
  Eigen::VectorXd s;  // input units
};

// Per-example weights mu + (sigma * noise) o (r s^T). Bias perturbations are
// shared across examples and are not flipped.
MLPParams flipout_perturb(const VariationalParams& q, std::span<const double> shared_noise,
                          std::span<const LayerSigns> signs);

struct VariationalTrainConfig {
  std::size_t steps = 20000;
  double learning_rate = 1e-3;
  double rho_init = -5.0;
  std::uint64_t seed = 0;
  // Flipout only: use all-ones sign vectors (reduces to Bayes by Backprop).
  bool force_unit_signs = false;
};

struct VariationalResult {
  VariationalParams q;
  std::vector<LossRecord> loss_history;  // negative ELBO estimate per step
  std::vector<double> kl_history;
};

// Minimizes KL(q || prior) - E_q[log N(targets; A + B u_raw, eps^2)] with one
// weight sample per step. Throws DivergenceError on a non-finite objective.
VariationalResult bbb_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                            const GaussianPrior& prior, const VariationalTrainConfig& config);

// Same objective with per-example decorrelated perturbations.
VariationalResult flipout_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                                const GaussianPrior& prior, const VariationalTrainConfig& config);

// Gradient of the data term with respect to (mu, rho) for one noise draw.
// Exposed to compare the estimator variance of the two schemes.
struct VariationalGradient {
  double nll = 0.0;
  Eigen::VectorXd mu;
  Eigen::VectorXd rho;
};
VariationalGradient variational_data_gradient(const RegressionData& data, const VariationalParams& q,
                                              const LikelihoodSpec& like, std::span<const double> noise,
                                              std::span<const Eigen::MatrixXd> r_signs,
                                              std::span<const Eigen::MatrixXd> s_signs);

// ---------------------------------------------------------------------------
// Neural linear model

struct LinearPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Conjugate Bayesian linear regression with prior N(0, prior_std^2 I) and
// noise std eps. features is n x d (n may be 0).
LinearPosterior nlm_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double eps,
                        double prior_std);

// Mean phi^T m and std sqrt(phi^T S phi + noise_var).
std::pair<double, double> nlm_predict(const LinearPosterior& post, const Eigen::VectorXd& phi,
                                      double noise_var = 0.0);

struct NLMPosterior {
  MLPConfig feature_net;           // full network; the final layer is replaced
  MLPParams feature_params;
  std::vector<LinearPosterior> last_layer;  // one per output; last entry of phi is the constant 1
  double eps = 1e-2;
  double prior_std = 1.0;
  bool include_noise = false;      // add eps^2 to the predictive variance

  // Features (d x n) at points: last hidden layer plus a constant row.
  Eigen::MatrixXd features(const Eigen::MatrixXd& points) const;
};

struct NLMTrainConfig {
  std::size_t epochs = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool include_noise = false;
};

// Fits the feature network by mean squared error on the enforced output,
// then the conjugate last layer on the transformed design B * phi.
NLMPosterior nlm_train(const RegressionData& data, const MLPConfig& net, const LikelihoodSpec& like,
                       const GaussianPrior& prior, const NLMTrainConfig& config,
                       std::vector<LossRecord>* loss_history = nullptr);

// ---------------------------------------------------------------------------
// Deep evidential regression

struct EvidentialOutput {
  double gamma = 0.0;
  double nu = 1.0;
  double alpha = 2.0;
  double beta = 1.0;
};

// gamma = raw0, nu = softplus(raw1), alpha = 1 + softplus(raw2), beta = softplus(raw3).
EvidentialOutput der_head(std::span<const double> raw);

// Negative log of the Student-t marginal of the Normal-Inverse-Gamma evidence.
double der_nll(const EvidentialOutput& out, double target);

// der_nll + lambda * |target - gamma| * (2 nu + alpha).
double der_loss(const EvidentialOutput& out, double target, double lambda);

// Partial derivatives of der_loss with respect to (gamma, nu, alpha, beta).
std::array<double, 4> der_loss_gradient(const EvidentialOutput& out, double target, double lambda);

// mean = gamma, variance = beta (1 + nu) / (nu (alpha - 1)). DomainError for alpha <= 1.
std::pair<double, double> der_predictive(const EvidentialOutput& out);

struct DERModel {
  MLPConfig net;  // output_dim = 4 * problem outputs
  MLPParams params;
  double lambda = 2.0;
};

struct DERTrainConfig {
  std::size_t epochs = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double lambda = 2.0;
};

// Trains the evidential head on the enforced output: location A + B gamma and
// scale parameter B^2 beta (the Student-t of u_raw pushed through the
// transform). Points with B = 0 carry no information and are skipped.
DERModel der_train(const RegressionData& data, const MLPConfig& hidden, const DERTrainConfig& config,
                   std::vector<LossRecord>* loss_history = nullptr);

// ---------------------------------------------------------------------------
// Predictive bands

struct PredictiveBand {
  Eigen::MatrixXd grid;  // dims x n
  Eigen::MatrixXd mean;  // outputs x n
  Eigen::MatrixXd std;   // outputs x n
  bool enforced = false;
};

// Monte Carlo estimate of the posterior predictive of u_raw: n_samples weight
// draws (sample k uses seed derive_seed(seed, k)), per-point sample mean and
// unbiased standard deviation. ConfigError for n_samples < 2.
PredictiveBand posterior_predictive_mc(const VariationalParams& q, const Eigen::MatrixXd& grid,
                                       std::size_t n_samples, std::uint64_t seed);

PredictiveBand nlm_band(const NLMPosterior& post, const Eigen::MatrixXd& grid);
PredictiveBand der_band(const DERModel& model, const Eigen::MatrixXd& grid);

// mean <- A + B mean, std <- |B| std. StructuralError if already enforced.
PredictiveBand enforce_predictive(const PredictiveBand& band, const Transform& transform);

}  // namespace deuq
