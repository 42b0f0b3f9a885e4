#include "deuq/stage1.hpp"

#include <algorithm>
#include <cmath>

#include "deuq/adam.hpp"
#include "deuq/rng.hpp"

namespace deuq {

std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::Equispaced: return "equispaced";
    case Sampler::UniformRandom: return "uniform_random";
    case Sampler::EquispacedJitter: return "equispaced_jitter";
  }
  return "?";
}

Sampler sampler_from_string(const std::string& name) {
  if (name == "equispaced") return Sampler::Equispaced;
  if (name == "uniform_random") return Sampler::UniformRandom;
  if (name == "equispaced_jitter") return Sampler::EquispacedJitter;
  throw ConfigError("unknown sampler '" + name + "' (valid: equispaced, uniform_random, equispaced_jitter)");
}

void TrainConfig::validate() const {
  if (n_collocation < 2) throw ConfigError("n_collocation must be at least 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be nonnegative");
  if (dataset_points < 1) throw ConfigError("dataset_points must be positive");
}

Eigen::MatrixXd grid_points(const std::vector<Interval>& domain, std::size_t n) {
  const auto dims = static_cast<Eigen::Index>(domain.size());
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < dims; ++d) total *= static_cast<Eigen::Index>(n);
  Eigen::MatrixXd pts(dims, total);
  for (Eigen::Index j = 0; j < total; ++j) {
    Eigen::Index rest = j;
    for (Eigen::Index d = 0; d < dims; ++d) {
      const auto k = rest % static_cast<Eigen::Index>(n);
      rest /= static_cast<Eigen::Index>(n);
      const Interval& iv = domain[static_cast<std::size_t>(d)];
      pts(d, j) = n == 1 ? iv.lo : iv.lo + iv.width() * static_cast<double>(k) / static_cast<double>(n - 1);
    }
  }
  return pts;
}

Eigen::MatrixXd sample_collocation(const std::vector<Interval>& domain, std::size_t n, Sampler sampler,
                                   std::uint64_t seed) {
  if (n < 2) throw ConfigError("collocation needs at least 2 points per axis");
  Rng rng(derive_seed(seed, "collocation"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (sampler) {
    case Sampler::Equispaced: return grid_points(domain, n);
    case Sampler::UniformRandom: {
      Eigen::MatrixXd pts = grid_points(domain, n);
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        for (Eigen::Index d = 0; d < pts.rows(); ++d) {
          const Interval& iv = domain[static_cast<std::size_t>(d)];
          pts(d, j) = iv.lo + iv.width() * unit(rng);
        }
      }
      return pts;
    }
    case Sampler::EquispacedJitter: {
      Eigen::MatrixXd pts = grid_points(domain, n);
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        for (Eigen::Index d = 0; d < pts.rows(); ++d) {
          const Interval& iv = domain[static_cast<std::size_t>(d)];
          const double half = 0.5 * iv.width() / static_cast<double>(n - 1);
          pts(d, j) = std::clamp(pts(d, j) + half * (2.0 * unit(rng) - 1.0), iv.lo, iv.hi);
        }
      }
      return pts;
    }
  }
  throw ConfigError("unknown sampler");
}

ResidualObjective::ResidualObjective(const ProblemSpec& problem, const MLPConfig& net, Eigen::MatrixXd points)
    : problem_(problem), net_(net), points_(std::move(points)), axes_(problem.seeded_axes()) {
  if (static_cast<std::size_t>(points_.rows()) != problem.n_inputs) {
    throw StructuralError("collocation points have the wrong dimension");
  }
  if (net.input_dim != problem.n_inputs || net.output_dim != problem.n_outputs) {
    throw ConfigError("network shape does not match the problem");
  }
  transforms_.resize(axes_.size());
  for (std::size_t p = 0; p < axes_.size(); ++p) {
    for (Eigen::Index j = 0; j < points_.cols(); ++j) {
      const Eigen::VectorXd x = points_.col(j);
      transforms_[p].push_back(problem.transform.at(point_jets(std::span<const double>(x.data(), x.size()), axes_[p])));
    }
  }
  traces_.resize(axes_.size());
}

double ResidualObjective::value(const MLPParams& params) { return run(params, nullptr); }

double ResidualObjective::value_and_gradient(const MLPParams& params, Eigen::VectorXd& grad) {
  return run(params, &grad);
}

double ResidualObjective::run(const MLPParams& params, Eigen::VectorXd* grad) {
  const std::size_t n_pass = axes_.size();
  const std::size_t n_out = problem_.n_outputs;
  const Eigen::Index n_pts = points_.cols();
  const double inv_n = 1.0 / static_cast<double>(n_pts);

  std::vector<JetBatch> adjoint;
  for (std::size_t p = 0; p < n_pass; ++p) {
    traces_[p].forward(net_, params, JetBatch::seeded(points_, axes_[p]), true);
    adjoint.push_back(JetBatch::zeros(static_cast<Eigen::Index>(n_out), n_pts));
  }

  double total = 0.0;
  std::vector<Var> leaves;
  PassJets<Var> raw(n_pass, std::vector<Jet2<Var>>(n_out));
  PassJets<Var> enforced(n_pass);
  for (Eigen::Index j = 0; j < n_pts; ++j) {
    tape_.clear();
    leaves.clear();
    for (std::size_t p = 0; p < n_pass; ++p) {
      const JetBatch& out = traces_[p].output();
      for (std::size_t o = 0; o < n_out; ++o) {
        const auto oi = static_cast<Eigen::Index>(o);
        raw[p][o] = Jet2<Var>(tape_.variable(out.value(oi, j)), tape_.variable(out.d1(oi, j)),
                              tape_.variable(out.d2(oi, j)));
        leaves.insert(leaves.end(), {raw[p][o].value, raw[p][o].d1, raw[p][o].d2});
      }
      enforced[p] = enforce<Var>(raw[p], transforms_[p][static_cast<std::size_t>(j)]);
    }
    const Eigen::VectorXd x = points_.col(j);
    const std::vector<Var> r =
        residual<Var>(problem_, enforced, problem_.required_order(), std::span<const double>(x.data(), x.size()));
    Var loss(0.0);
    for (const Var& ri : r) loss += ri * ri;
    total += loss.value();
    if (grad) {
      const std::vector<double> g = tape_.gradient(loss, leaves);
      std::size_t k = 0;
      for (std::size_t p = 0; p < n_pass; ++p) {
        for (std::size_t o = 0; o < n_out; ++o) {
          const auto oi = static_cast<Eigen::Index>(o);
          adjoint[p].value(oi, j) = g[k++] * inv_n;
          adjoint[p].d1(oi, j) = g[k++] * inv_n;
          adjoint[p].d2(oi, j) = g[k++] * inv_n;
        }
      }
    }
  }
  if (grad) {
    *grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
    for (std::size_t p = 0; p < n_pass; ++p) *grad += traces_[p].backward(params, adjoint[p]);
  }
  return total * inv_n;
}

Stage1Result train_deterministic(const ProblemSpec& problem, const MLPConfig& net, const TrainConfig& train) {
  net.validate();
  train.validate();
  Stage1Result result;
  result.problem = problem.name;
  result.net = net;
  result.train = train;

  ResidualObjective objective(problem, net,
                              sample_collocation(problem.train_domain, train.n_collocation, train.sampler, train.seed));
  MLPParams params = init(net);
  Eigen::VectorXd flat = params.flatten();
  Eigen::VectorXd last_finite = flat;
  Adam adam(flat.size(), AdamConfig{train.learning_rate});
  Eigen::VectorXd grad;
  for (std::size_t epoch = 0;; ++epoch) {
    const double loss = objective.value_and_gradient(params, grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw DivergenceError("stage-1 training diverged at epoch " + std::to_string(epoch), epoch,
                            std::vector<double>(last_finite.data(), last_finite.data() + last_finite.size()));
    }
    last_finite = flat;
    result.loss_history.push_back({epoch, loss});
    if (epoch >= train.epochs || (train.tolerance > 0.0 && loss <= train.tolerance)) break;
    adam.step(flat, grad);
    params = MLPParams::unflatten(net, std::span<const double>(flat.data(), flat.size()));
  }
  result.params = std::move(params);

  const Dataset data = emit_dataset(problem, result, train.dataset_points);
  result.dataset_points = data.points;
  result.dataset_values = data.values;
  return result;
}

Eigen::MatrixXd enforced_values(const ProblemSpec& problem, const MLPConfig& net, const MLPParams& params,
                                const Eigen::MatrixXd& points) {
  Eigen::MatrixXd A, B;
  problem.transform.values(points, A, B);
  return A + B.cwiseProduct(evaluate(net, params, points));
}

Dataset emit_dataset(const ProblemSpec& problem, const Stage1Result& result, std::size_t n_per_axis) {
  Dataset d;
  d.points = grid_points(problem.train_domain, n_per_axis);
  d.values = enforced_values(problem, result.net, result.params, d.points);
  if (!d.values.allFinite()) throw DivergenceError("stage-1 solution is not finite on the dataset grid", 0, {});
  return d;
}

}  // namespace deuq
