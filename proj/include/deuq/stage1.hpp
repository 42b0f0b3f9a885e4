#pragma once

// Deterministic solve: a network u_raw trained so that the enforced solution
// A + B * u_raw minimizes the mean squared residual over collocation points.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "deuq/mlp.hpp"
#include "deuq/problems.hpp"

namespace deuq {

enum class Sampler { Equispaced, UniformRandom, EquispacedJitter };

std::string to_string(Sampler s);
Sampler sampler_from_string(const std::string& name);

struct TrainConfig {
  std::size_t n_collocation = 64;  // per input dimension
  Sampler sampler = Sampler::Equispaced;
  std::size_t epochs = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double tolerance = 0.0;           // early stop once the loss is <= tolerance (0 disables)
  std::size_t dataset_points = 128;  // per input dimension

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
};

struct Stage1Result {
  std::string problem;
  MLPConfig net;
  TrainConfig train;
  MLPParams params;
  std::vector<LossRecord> loss_history;
  Eigen::MatrixXd dataset_points;  // dims x n
  Eigen::MatrixXd dataset_values;  // outputs x n, enforced solution
};

// Tensor-product grid with `n` equispaced points per axis, axis 0 fastest.
Eigen::MatrixXd grid_points(const std::vector<Interval>& domain, std::size_t n);

// Collocation points inside `domain`; throws ConfigError for n < 2.
Eigen::MatrixXd sample_collocation(const std::vector<Interval>& domain, std::size_t n, Sampler sampler,
                                   std::uint64_t seed);

// Mean over points of the summed squared residuals of the enforced network,
// and its gradient with respect to the flat parameters.
//
// Input derivatives come from batched jet passes through the network; the
// enforcement and residual for each point are recorded on a tape whose
// adjoints seed the reverse sweep through those passes.
class ResidualObjective {
 public:
  ResidualObjective(const ProblemSpec& problem, const MLPConfig& net, Eigen::MatrixXd points);

  double value(const MLPParams& params);
  double value_and_gradient(const MLPParams& params, Eigen::VectorXd& grad);

  const Eigen::MatrixXd& points() const { return points_; }

 private:
  double run(const MLPParams& params, Eigen::VectorXd* grad);

  const ProblemSpec& problem_;
  MLPConfig net_;
  Eigen::MatrixXd points_;
  std::vector<std::size_t> axes_;
  std::vector<std::vector<TransformAt>> transforms_;  // [pass][point]
  std::vector<MLPTrace> traces_;
  Tape tape_;
};

// Throws DivergenceError (carrying the last finite parameters) if the loss
// stops being finite.
Stage1Result train_deterministic(const ProblemSpec& problem, const MLPConfig& net, const TrainConfig& train);

struct Dataset {
  Eigen::MatrixXd points;  // dims x n
  Eigen::MatrixXd values;  // outputs x n
};

// Enforced solution on a grid of `n_per_axis` points per axis over the
// training domain.
Dataset emit_dataset(const ProblemSpec& problem, const Stage1Result& result, std::size_t n_per_axis);

// Enforced network values at arbitrary points (outputs x n).
Eigen::MatrixXd enforced_values(const ProblemSpec& problem, const MLPConfig& net, const MLPParams& params,
                                const Eigen::MatrixXd& points);

}  // namespace deuq
