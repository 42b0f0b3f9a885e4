#include <gtest/gtest.h>

#include <cmath>

#include "deuq/stage1.hpp"

using namespace deuq;

namespace {

// Residual loss assembled point by point from the single-point jet forward,
// the transform and the residual operator.
double pointwise_loss(const ProblemSpec& p, const MLPConfig& net, const MLPParams& params, const Eigen::MatrixXd& pts) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const std::vector<double> x(pts.col(j).data(), pts.col(j).data() + pts.rows());
    PassJets<double> passes;
    for (std::size_t axis : p.seeded_axes()) {
      const std::vector<Jet> xj = point_jets(x, axis);
      const std::vector<Jet> raw = forward(net, params, xj);
      passes.push_back(enforce<double>(raw, p.transform.at(xj)));
    }
    for (double r : residual<double>(p, passes, 2, x)) total += r * r;
  }
  return total / static_cast<double>(pts.cols());
}

MLPConfig small_net(const ProblemSpec& p, std::vector<std::size_t> hidden = {6, 5}) {
  MLPConfig c;
  c.input_dim = p.n_inputs;
  c.output_dim = p.n_outputs;
  c.hidden_sizes = std::move(hidden);
  c.seed = 17;
  return c;
}

}  // namespace

TEST(Collocation, EquispacedExample) {
  const Eigen::MatrixXd pts = sample_collocation({{0.0, 1.0}}, 3, Sampler::Equispaced, 0);
  ASSERT_EQ(pts.cols(), 3);
  EXPECT_EQ(pts(0, 0), 0.0);
  EXPECT_EQ(pts(0, 1), 0.5);
  EXPECT_EQ(pts(0, 2), 1.0);
}

TEST(Collocation, DeterministicAndInBounds) {
  const std::vector<Interval> dom{{-1.0, 1.0}, {0.0, 1.0}};
  for (Sampler s : {Sampler::Equispaced, Sampler::UniformRandom, Sampler::EquispacedJitter}) {
    const Eigen::MatrixXd a = sample_collocation(dom, 9, s, 42);
    const Eigen::MatrixXd b = sample_collocation(dom, 9, s, 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.cols(), 81);
    EXPECT_GE(a.row(0).minCoeff(), -1.0);
    EXPECT_LE(a.row(0).maxCoeff(), 1.0);
    EXPECT_GE(a.row(1).minCoeff(), 0.0);
    EXPECT_LE(a.row(1).maxCoeff(), 1.0);
  }
  EXPECT_NE(sample_collocation(dom, 9, Sampler::UniformRandom, 1), sample_collocation(dom, 9, Sampler::UniformRandom, 2));
  EXPECT_THROW(sample_collocation(dom, 1, Sampler::Equispaced, 0), ConfigError);
}

TEST(Collocation, SamplerNames) {
  for (Sampler s : {Sampler::Equispaced, Sampler::UniformRandom, Sampler::EquispacedJitter}) {
    EXPECT_EQ(sampler_from_string(to_string(s)), s);
  }
  EXPECT_THROW(sampler_from_string("sobol"), ConfigError);
}

TEST(ResidualObjective, ValueMatchesPointwiseOracle) {
  for (const auto& name : preset_names()) {
    const ProblemSpec p = make_preset(name);
    const MLPConfig net = small_net(p);
    const MLPParams params = init(net);
    const Eigen::MatrixXd pts = sample_collocation(p.train_domain, p.n_inputs == 1 ? 9 : 4, Sampler::UniformRandom, 3);
    ResidualObjective obj(p, net, pts);
    const double ref = pointwise_loss(p, net, params, pts);
    EXPECT_NEAR(obj.value(params), ref, 1e-12 * std::max(1.0, ref)) << name;
  }
}

TEST(ResidualObjective, GradientMatchesFiniteDifferences) {
  for (const auto& name : preset_names()) {
    const ProblemSpec p = make_preset(name);
    const MLPConfig net = small_net(p, {5});
    const MLPParams params = init(net);
    const Eigen::MatrixXd pts = sample_collocation(p.train_domain, p.n_inputs == 1 ? 7 : 3, Sampler::UniformRandom, 8);
    ResidualObjective obj(p, net, pts);
    Eigen::VectorXd g;
    obj.value_and_gradient(params, g);
    const Eigen::VectorXd flat = params.flatten();
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd a = flat, b = flat;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      const double fa = obj.value(MLPParams::unflatten(net, std::span<const double>(a.data(), a.size())));
      const double fb = obj.value(MLPParams::unflatten(net, std::span<const double>(b.data(), b.size())));
      const double fd = (fa - fb) / 2e-6;
      EXPECT_NEAR(g[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << name << " param " << i;
    }
  }
}

TEST(TrainDeterministic, ZeroEpochsKeepsInit) {
  const ProblemSpec p = make_preset("linear_ode");
  const MLPConfig net = small_net(p);
  TrainConfig tc;
  tc.epochs = 0;
  tc.dataset_points = 5;
  const Stage1Result r = train_deterministic(p, net, tc);
  EXPECT_EQ(r.params.flatten(), init(net).flatten());
  ASSERT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.loss_history[0].epoch, 0u);
  // Enforcement holds regardless of training.
  EXPECT_EQ(r.dataset_values(0, 0), 1.0);
}

TEST(TrainDeterministic, Reproducible) {
  const ProblemSpec p = make_preset("duffing");
  const MLPConfig net = small_net(p);
  TrainConfig tc;
  tc.epochs = 50;
  tc.n_collocation = 16;
  tc.sampler = Sampler::UniformRandom;
  const Stage1Result a = train_deterministic(p, net, tc);
  const Stage1Result b = train_deterministic(p, net, tc);
  ASSERT_EQ(a.loss_history.size(), b.loss_history.size());
  for (std::size_t k = 0; k < a.loss_history.size(); ++k) EXPECT_EQ(a.loss_history[k].loss, b.loss_history[k].loss);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
}

TEST(TrainDeterministic, ToleranceStopsEarly) {
  const ProblemSpec p = make_preset("linear_ode");
  TrainConfig tc;
  tc.epochs = 5000;
  tc.tolerance = 1e-2;
  const Stage1Result r = train_deterministic(p, small_net(p), tc);
  EXPECT_LT(r.loss_history.size(), 5001u);
  EXPECT_LE(r.loss_history.back().loss, 1e-2);
}

TEST(TrainDeterministic, HugeLearningRateNeverSilentlyNaN) {
  const ProblemSpec p = make_preset("linear_ode");
  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e3;
  try {
    const Stage1Result r = train_deterministic(p, small_net(p), tc);
    for (const LossRecord& rec : r.loss_history) EXPECT_TRUE(std::isfinite(rec.loss));
    EXPECT_TRUE(r.dataset_values.allFinite());
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.last_finite_params().empty());
  }
}

TEST(TrainDeterministic, InvalidConfig) {
  const ProblemSpec p = make_preset("linear_ode");
  TrainConfig tc;
  tc.learning_rate = 0.0;
  EXPECT_THROW(train_deterministic(p, small_net(p), tc), ConfigError);
  tc = TrainConfig{};
  tc.n_collocation = 1;
  EXPECT_THROW(train_deterministic(p, small_net(p), tc), ConfigError);
}

TEST(EmitDataset, SinglePointAtInitialTime) {
  const ProblemSpec p = make_preset("linear_ode");
  TrainConfig tc;
  tc.epochs = 3;
  tc.dataset_points = 4;
  const Stage1Result r = train_deterministic(p, small_net(p), tc);
  const Dataset d = emit_dataset(p, r, 1);
  ASSERT_EQ(d.points.cols(), 1);
  EXPECT_EQ(d.points(0, 0), 0.0);
  EXPECT_EQ(d.values(0, 0), 1.0);
}

TEST(EmitDataset, CoarseGridIsSubsetOfFine) {
  const ProblemSpec p = make_preset("lotka_volterra");
  TrainConfig tc;
  tc.epochs = 3;
  const Stage1Result r = train_deterministic(p, small_net(p), tc);
  const Dataset coarse = emit_dataset(p, r, 9);
  const Dataset fine = emit_dataset(p, r, 17);
  for (Eigen::Index j = 0; j < coarse.points.cols(); ++j) {
    EXPECT_EQ(coarse.points(0, j), fine.points(0, 2 * j));
    EXPECT_EQ(coarse.values.col(j), fine.values.col(2 * j));
  }
}

TEST(TrainDeterministic, LinearOdeDefaultsFitTheAnalyticSolution) {
  const ProblemSpec p = make_preset("linear_ode");
  TrainConfig tc;
  tc.epochs = 20000;
  const Stage1Result r = train_deterministic(p, MLPConfig{}, tc);
  EXPECT_LT(r.loss_history.back().loss, 1e-4);
  double max_err = 0.0;
  for (Eigen::Index j = 0; j < r.dataset_points.cols(); ++j) {
    const double t = r.dataset_points(0, j);
    max_err = std::max(max_err, std::abs(r.dataset_values(0, j) - std::exp(-t * t)));
    EXPECT_GE(r.dataset_values(0, j), -1e-2);
    EXPECT_LE(r.dataset_values(0, j), 1.0 + 1e-2);
  }
  EXPECT_LT(max_err, 1e-2);
}
