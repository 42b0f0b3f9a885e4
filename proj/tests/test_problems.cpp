#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "deuq/problems.hpp"

using namespace deuq;

namespace {

PassJets<double> single_pass(std::vector<Jet> outs) { return {std::move(outs)}; }

std::vector<double> res(const ProblemSpec& p, const PassJets<double>& passes, double t) {
  const std::vector<double> pt{t};
  return residual<double>(p, passes, 2, pt);
}

// Cole-Hopf solution of u_t + u u_x = nu u_xx with u(x, 0) = -sin(pi x):
// u = -int sin(pi (x - s)) f(x - s) G(s) ds / int f(x - s) G(s) ds,
// f(y) = exp(-cos(pi y) / (2 pi nu)), G(s) = exp(-s^2 / (4 nu t)).
double burgers_cole_hopf(double x, double t, double nu) {
  const double w = std::sqrt(4.0 * nu * t);
  const int n = 4000;
  const double lo = -10.0 * w, h = 20.0 * w / n;
  const double shift = 1.0 / (2.0 * std::numbers::pi * nu);
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double s = lo + h * k;
    const double wt = (k == 0 || k == n) ? 0.5 : 1.0;
    const double y = x - s;
    const double e = wt * std::exp(-std::cos(std::numbers::pi * y) / (2.0 * std::numbers::pi * nu) - shift -
                                   s * s / (4.0 * nu * t));
    num += std::sin(std::numbers::pi * y) * e;
    den += e;
  }
  return -num / den;
}

}  // namespace

TEST(Presets, NamesAndUnknownPreset) {
  EXPECT_EQ(preset_names(), (std::vector<std::string>{"linear_ode", "duffing", "lotka_volterra", "burgers"}));
  try {
    make_preset("heat");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("linear_ode"), std::string::npos);
  }
  for (const auto& n : preset_names()) {
    const ProblemSpec p = make_preset(n);
    EXPECT_EQ(p.n_outputs, n == "lotka_volterra" ? 2u : 1u);
    for (std::size_t d = 0; d < p.n_inputs; ++d) {
      EXPECT_LE(p.extrap_domain[d].lo, p.train_domain[d].lo);
      EXPECT_GE(p.extrap_domain[d].hi, p.train_domain[d].hi);
    }
  }
}

TEST(Residual, LinearOdeAnalyticSolutionIsZero) {
  const ProblemSpec p = make_preset("linear_ode");
  for (double t = 0.0; t <= 3.0; t += 0.1) {
    const double u = std::exp(-t * t);
    const auto r = res(p, single_pass({Jet(u, -2 * t * u, (4 * t * t - 2) * u)}), t);
    EXPECT_NEAR(r[0], 0.0, 1e-14);
  }
}

TEST(Residual, LinearOdeConstantHandValue) {
  const ProblemSpec p = make_preset("linear_ode");
  EXPECT_DOUBLE_EQ(res(p, single_pass({Jet(1.0, 0.0, 0.0)}), 1.0)[0], 2.0);
}

TEST(Residual, HarmonicDuffingCosineIsZero) {
  ProblemSpec p = make_preset("duffing");
  p.coefficients["eps_nl"] = 0.0;
  rebuild_problem(p);
  for (double t = 0.0; t <= 3.0; t += 0.25) {
    const auto r = res(p, single_pass({Jet(std::cos(t), -std::sin(t), -std::cos(t))}), t);
    EXPECT_NEAR(r[0], 0.0, 1e-12);
  }
}

TEST(Residual, BurgersConstantIsZero) {
  const ProblemSpec p = make_preset("burgers");
  const PassJets<double> passes{{Jet(0.3)}, {Jet(0.3)}};
  const std::vector<double> pt{0.1, 0.5};
  EXPECT_EQ(residual<double>(p, passes, 2, pt)[0], 0.0);
}

TEST(Residual, MissingOrderIsStructuralError) {
  const std::vector<double> pt{0.5};
  EXPECT_THROW(residual<double>(make_preset("duffing"), single_pass({Jet(1.0)}), 1, pt), StructuralError);
  const std::vector<double> pt2{0.0, 0.5};
  EXPECT_THROW(residual<double>(make_preset("burgers"), {{Jet(1.0)}, {Jet(1.0)}}, 1, pt2), StructuralError);
  EXPECT_NO_THROW(residual<double>(make_preset("linear_ode"), single_pass({Jet(1.0)}), 1, pt));
}

TEST(Residual, LotkaVolterraForms) {
  const PassJets<double> passes{{Jet(2.0, 0.5, 0.0), Jet(3.0, -1.0, 0.0)}};
  const std::vector<double> pt{1.0};
  const auto default_form = residual<double>(make_preset("lotka_volterra"), passes, 1, pt);
  const auto standard = residual<double>(make_preset("lotka_volterra", true), passes, 1, pt);
  // u' - u + u v, then v' + u - u v (default form) or v' - u v + v (standard).
  EXPECT_DOUBLE_EQ(default_form[0], 0.5 - 2.0 + 6.0);
  EXPECT_DOUBLE_EQ(standard[0], default_form[0]);
  EXPECT_DOUBLE_EQ(default_form[1], -1.0 + 2.0 - 6.0);
  EXPECT_DOUBLE_EQ(standard[1], -1.0 - 6.0 + 3.0);
}

TEST(Enforce, HandExample) {
  const ProblemSpec p = make_preset("linear_ode");
  const double t = std::log(2.0);
  const TransformAt tr = p.transform.at(point_jets(std::vector<double>{t}, 0));
  const std::vector<Jet> raw{Jet(1.0)};
  EXPECT_NEAR(enforce<double>(raw, tr)[0].value, 1.5, 1e-15);
}

TEST(Enforce, LargeTimeLimit) {
  const ProblemSpec p = make_preset("linear_ode");
  const TransformAt tr = p.transform.at(point_jets(std::vector<double>{60.0}, 0));
  const std::vector<Jet> raw{Jet(0.25)};
  EXPECT_DOUBLE_EQ(enforce<double>(raw, tr)[0].value, 1.25);
}

TEST(Enforce, ConditionsHoldExactlyForAnyRawOutput) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  for (const auto& name : preset_names()) {
    const ProblemSpec p = make_preset(name);
    for (const Condition& c : p.conditions) {
      const Eigen::MatrixXd pts = condition_points(p, c, 17);
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        const std::vector<double> pt(pts.col(j).data(), pts.col(j).data() + pts.rows());
        const TransformAt tr = p.transform.at(point_jets(pt, c.axis));
        for (int k = 0; k < 1000 / static_cast<int>(pts.cols()) + 1; ++k) {
          std::vector<Jet> raw;
          for (std::size_t o = 0; o < p.n_outputs; ++o) raw.emplace_back(n(rng), n(rng), n(rng));
          const auto u = enforce<double>(raw, tr);
          const Jet& uc = u[c.output];
          if (c.kind == ConditionKind::InitialDerivative) {
            EXPECT_EQ(uc.d1, c.value(pt)) << name;
          } else {
            EXPECT_EQ(uc.value, c.value(pt)) << name;
          }
        }
      }
    }
  }
}

TEST(Enforce, JetsMatchFiniteDifferences) {
  // u_raw(t) = sin(2t) + 0.3 pushed through each transform.
  for (const auto& name : preset_names()) {
    const ProblemSpec p = make_preset(name);
    for (std::size_t axis : p.seeded_axes()) {
      std::vector<double> pt = p.n_inputs == 1 ? std::vector<double>{0.7} : std::vector<double>{0.3, 0.6};
      auto enforced = [&](const std::vector<double>& x, bool seed) {
        const auto xj = point_jets(x, seed ? axis : 99);
        std::vector<Jet> raw(p.n_outputs, sin(2.0 * xj[axis]) + Jet(0.3));
        return enforce<double>(raw, p.transform.at(xj));
      };
      const auto u = enforced(pt, true);
      const double h = 1e-4;
      auto at = [&](double dx) {
        auto x = pt;
        x[axis] += dx;
        return enforced(x, false)[0].value;
      };
      const double d1 = (at(h) - at(-h)) / (2 * h);
      const double d2 = (at(h) - 2 * at(0) + at(-h)) / (h * h);
      EXPECT_NEAR(u[0].d1, d1, 1e-4 * std::max(1.0, std::abs(d1))) << name;
      EXPECT_NEAR(u[0].d2, d2, 1e-4 * std::max(1.0, std::abs(d2))) << name;
    }
  }
}

TEST(Enforce, TransformBNonnegativeAndVanishesOnConditions) {
  for (const auto& name : preset_names()) {
    const ProblemSpec p = make_preset(name);
    Eigen::MatrixXd A, B;
    const Eigen::MatrixXd grid = p.n_inputs == 1 ? Eigen::MatrixXd(Eigen::RowVectorXd::LinSpaced(31, 0.0, p.extrap_domain[0].hi))
                                                 : Eigen::MatrixXd::Random(2, 50).cwiseAbs();
    p.transform.values(grid, A, B);
    EXPECT_GE(B.minCoeff(), 0.0) << name;
  }
}

TEST(Reference, LinearOdeAnalytic) {
  const ProblemSpec p = make_preset("linear_ode");
  Eigen::MatrixXd g(1, 1);
  g(0, 0) = 1.0;
  EXPECT_NEAR(reference_solution(p, g)(0, 0), 0.367879, 1e-6);
}

TEST(Reference, HarmonicDuffingAtPi) {
  ProblemSpec p = make_preset("duffing");
  p.coefficients["eps_nl"] = 0.0;
  p.extrap_domain[0].hi = 4.0;
  rebuild_problem(p);
  Eigen::MatrixXd g(1, 1);
  g(0, 0) = std::numbers::pi;
  EXPECT_NEAR(reference_solution(p, g)(0, 0), -1.0, 1e-6);
}

TEST(Reference, Rk4StepHalving) {
  for (const char* name : {"lotka_volterra", "duffing"}) {
    const ProblemSpec p = make_preset(name);
    std::vector<double> times;
    for (int k = 0; k <= 60; ++k) times.push_back(p.train_domain[0].hi * k / 60.0);
    const Eigen::MatrixXd a = rk4_solve(p, times, 1e-3);
    const Eigen::MatrixXd b = rk4_solve(p, times, 5e-4);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6) << name;
  }
}

TEST(Reference, Rk4SolvesTheResidual) {
  // Central differences of the RK4 trajectory satisfy the LV equations.
  const ProblemSpec p = make_preset("lotka_volterra");
  const double h = 1e-3;
  for (double t : {0.5, 1.5, 2.5}) {
    const std::vector<double> ts{t - h, t, t + h};
    const Eigen::MatrixXd s = rk4_solve(p, ts, 1e-4);
    const PassJets<double> passes{{Jet(s(0, 1), (s(0, 2) - s(0, 0)) / (2 * h), 0.0),
                                   Jet(s(1, 1), (s(1, 2) - s(1, 0)) / (2 * h), 0.0)}};
    const std::vector<double> pt{t};
    const auto r = residual<double>(p, passes, 1, pt);
    EXPECT_NEAR(r[0], 0.0, 1e-5);
    EXPECT_NEAR(r[1], 0.0, 1e-5);
  }
}

TEST(Reference, OutsideExtrapolationDomainIsDomainError) {
  Eigen::MatrixXd g(1, 1);
  g(0, 0) = 10.0;
  EXPECT_THROW(reference_solution(make_preset("duffing"), g), DomainError);
}

TEST(Reference, BurgersMatchesColeHopf) {
  const ProblemSpec p = make_preset("burgers");
  Eigen::MatrixXd g(2, 12);
  const double xs[4] = {-0.75, -0.2, 0.35, 0.9};
  const double ts[3] = {0.25, 0.8, 1.4};
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) {
      g(0, i * 3 + k) = xs[i];
      g(1, i * 3 + k) = ts[k];
    }
  }
  const Eigen::MatrixXd u = reference_solution(p, g);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    EXPECT_NEAR(u(0, j), burgers_cole_hopf(g(0, j), g(1, j), 0.1), 1e-4) << g(0, j) << "," << g(1, j);
  }
  // Initial and boundary values.
  Eigen::MatrixXd b(2, 3);
  b << -1.0, 1.0, 0.5, 0.7, 0.7, 0.0;
  const Eigen::MatrixXd ub = reference_solution(p, b);
  EXPECT_EQ(ub(0, 0), 0.0);
  EXPECT_EQ(ub(0, 1), 0.0);
  EXPECT_NEAR(ub(0, 2), -1.0, 1e-12);
}
