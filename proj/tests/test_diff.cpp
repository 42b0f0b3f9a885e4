#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "deuq/jet.hpp"
#include "deuq/mlp.hpp"
#include "deuq/tape.hpp"

using namespace deuq;

namespace {

// Central differences of a scalar function, used as the derivative oracle.
template <class F>
double fd1(F f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}
template <class F>
double fd2(F f, double x, double h = 1e-4) {
  return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

}  // namespace

TEST(Jet, PolynomialExample) {
  // f(t) = t^3 at t = 2: (8, 12, 12)
  const Jet t = seed_input(2.0, true);
  const Jet y = t * t * t;
  EXPECT_DOUBLE_EQ(y.value, 8.0);
  EXPECT_DOUBLE_EQ(y.d1, 12.0);
  EXPECT_DOUBLE_EQ(y.d2, 12.0);
  const Jet p = pow_int(t, 3);
  EXPECT_DOUBLE_EQ(p.d1, 12.0);
  EXPECT_DOUBLE_EQ(p.d2, 12.0);
}

TEST(Jet, ExpTanhSinMatchClosedForm) {
  const double x = 0.7;
  const Jet t = seed_input(x, true);
  const Jet e = exp(t * t);  // d/dx e^{x^2} = 2x e, d2 = (2 + 4x^2) e
  EXPECT_NEAR(e.d1, 2 * x * std::exp(x * x), 1e-14);
  EXPECT_NEAR(e.d2, (2 + 4 * x * x) * std::exp(x * x), 1e-13);
  const Jet th = tanh(t);
  const double s = 1 - std::tanh(x) * std::tanh(x);
  EXPECT_NEAR(th.d1, s, 1e-15);
  EXPECT_NEAR(th.d2, -2 * std::tanh(x) * s, 1e-15);
  const Jet sn = sin(t);
  EXPECT_NEAR(sn.d1, std::cos(x), 1e-15);
  EXPECT_NEAR(sn.d2, -std::sin(x), 1e-15);
}

TEST(Jet, UnseededInputHasZeroDerivatives) {
  const Jet t = seed_input(1.3, false);
  const Jet y = tanh(t * t) + exp(t);
  EXPECT_EQ(y.d1, 0.0);
  EXPECT_EQ(y.d2, 0.0);
}

TEST(Jet, DivisionByZeroIsDomainError) {
  EXPECT_THROW(Jet(1.0) / Jet(0.0), DomainError);
  EXPECT_THROW(jet_apply(ElementaryFn::Div, Jet(1.0), Jet(0.0)), DomainError);
}

TEST(Jet, ElementaryFunctionsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const std::vector<ElementaryFn> fns = {ElementaryFn::Add,  ElementaryFn::Mul, ElementaryFn::Neg,
                                         ElementaryFn::Exp,  ElementaryFn::Tanh, ElementaryFn::Sin,
                                         ElementaryFn::PowInt, ElementaryFn::Div};
  for (int trial = 0; trial < 50; ++trial) {
    const double x0 = u(rng);
    const double c = 2.0 + u(rng);
    for (ElementaryFn f : fns) {
      // Compose with a nonlinear inner map so the second derivative is nontrivial.
      auto eval = [&](double x) {
        const Jet a = sin(seed_input(x, true)) + Jet(0.2);
        const Jet b = Jet(c) + seed_input(x, true) * seed_input(x, true);
        return jet_apply(f, a, b, 3);
      };
      const Jet y = eval(x0);
      auto val = [&](double x) { return eval(x).value; };
      EXPECT_NEAR(y.d1, fd1(val, x0), 1e-6 * std::max(1.0, std::abs(y.d1)));
      EXPECT_NEAR(y.d2, fd2(val, x0), 1e-4 * std::max(1.0, std::abs(y.d2)));
    }
  }
}

TEST(Tape, GradientOfSimpleExpression) {
  Tape tape;
  const Var x = tape.variable(1.5);
  const Var y = tape.variable(-0.5);
  const Var z = x * y + exp(x) / (y * y + 1.0);
  const std::vector<Var> wrt{x, y};
  const auto g = tape.gradient(z, wrt);
  const double e = std::exp(1.5), d = 1.25;
  EXPECT_NEAR(g[0], -0.5 + e / d, 1e-14);
  EXPECT_NEAR(g[1], 1.5 - e * 2 * -0.5 / (d * d), 1e-13);
}

TEST(Tape, ConstantsCarryNoAdjoint) {
  Tape tape;
  const Var x = tape.variable(2.0);
  const Var c(3.0);
  EXPECT_TRUE(c.is_constant());
  const Var z = c * x;
  const std::vector<Var> wrt{x};
  EXPECT_DOUBLE_EQ(tape.gradient(z, wrt)[0], 3.0);
  const std::vector<Var> bad{c};
  EXPECT_THROW(tape.gradient(z, bad), StructuralError);
}

TEST(Tape, DivisionByZeroIsDomainError) {
  Tape tape;
  const Var x = tape.variable(1.0);
  EXPECT_THROW(x / Var(0.0), DomainError);
}

TEST(Tape, FiniteDiffCheckOnUnaryFunctions) {
  const TapeObjective obj = [](Tape&, std::span<const Var> p) {
    return log(p[0]) * sqrt(p[1]) + tanh(p[0] - p[1]) + sin(p[2]) * cos(p[0]) + log1p(p[1] * p[1]) +
           abs(p[2] - 3.0);
  };
  const std::vector<double> params{1.2, 0.8, -0.4};
  EXPECT_LT(finite_diff_check(obj, params, 1e-6), 1e-7);
  EXPECT_THROW(finite_diff_check(obj, params, 0.0), ConfigError);
  EXPECT_NEAR(evaluate_objective(obj, params),
              std::log(1.2) * std::sqrt(0.8) + std::tanh(0.4) + std::sin(-0.4) * std::cos(1.2) +
                  std::log1p(0.64) + 3.4,
              1e-14);
}

TEST(Tape, ForwardOverReverseSecondDerivative) {
  // d/dw of the second input-derivative of tanh(w t) at t: the mixed partial
  // needs jets nested under the tape.
  const double t = 0.9;
  const TapeObjective obj = [t](Tape&, std::span<const Var> p) {
    const Jet2<Var> x(Var(t), Var(1.0), Var(0.0));
    const Jet2<Var> y = tanh(p[0] * x);
    return y.d2 + y.d1 * p[0];
  };
  const std::vector<double> w{0.7};
  EXPECT_LT(finite_diff_check(obj, w, 1e-6), 1e-8);
}

// Networks of 1 to 3 layers: input derivatives of the batched jet pass and the
// single-point jet pass against central differences in the input, and the
// reverse sweep against central differences in the parameters.
TEST(MLPDerivatives, RandomNetworksMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> layers(1, 3), width(2, 12), act(0, 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    MLPConfig cfg;
    cfg.hidden_sizes.clear();
    for (int l = layers(rng); l > 0; --l) cfg.hidden_sizes.push_back(static_cast<std::size_t>(width(rng)));
    cfg.activation = act(rng) ? Activation::Tanh : Activation::Sin;
    cfg.seed = rng();
    const MLPParams params = init(cfg);
    const double x0 = u(rng);
    auto val = [&](double x) {
      const Jet in(x, 0.0, 0.0);
      return forward(cfg, params, std::span<const Jet>(&in, 1))[0].value;
    };
    const Jet in = seed_input(x0, true);
    const Jet y = forward(cfg, params, std::span<const Jet>(&in, 1))[0];
    EXPECT_NEAR(y.d1, fd1(val, x0), 1e-6);
    EXPECT_NEAR(y.d2, fd2(val, x0), 1e-4);

    Eigen::MatrixXd pts(1, 1);
    pts(0, 0) = x0;
    MLPTrace trace;
    const JetBatch& out = trace.forward(cfg, params, JetBatch::seeded(pts, 0), true);
    EXPECT_NEAR(out.value(0, 0), y.value, 1e-13);
    EXPECT_NEAR(out.d1(0, 0), y.d1, 1e-12);
    EXPECT_NEAR(out.d2(0, 0), y.d2, 1e-12);

    // Reverse sweep of L = value + 0.5 d1 + 0.25 d2.
    JetBatch adj = JetBatch::zeros(1, 1);
    adj.value(0, 0) = 1.0;
    adj.d1(0, 0) = 0.5;
    adj.d2(0, 0) = 0.25;
    const Eigen::VectorXd g = trace.backward(params, adj);
    Eigen::VectorXd flat = params.flatten();
    auto loss = [&](const Eigen::VectorXd& f) {
      const MLPParams p = MLPParams::unflatten(cfg, std::span<const double>(f.data(), f.size()));
      MLPTrace tr;
      const JetBatch& o = tr.forward(cfg, p, JetBatch::seeded(pts, 0), true);
      return o.value(0, 0) + 0.5 * o.d1(0, 0) + 0.25 * o.d2(0, 0);
    };
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd a = flat, b = flat;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      const double ref = (loss(a) - loss(b)) / 2e-6;
      EXPECT_NEAR(g[i], ref, 1e-6 * std::max(1.0, std::abs(ref)));
    }
  }
}
