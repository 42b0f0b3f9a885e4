#include "deuq/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace deuq {

Transform Transform::identity(std::size_t n_outputs) {
  return Transform(n_outputs, [n_outputs](std::span<const Jet>) {
    return TransformAt{std::vector<Jet>(n_outputs, Jet(0.0)), std::vector<Jet>(n_outputs, Jet(1.0))};
  });
}

void Transform::values(const Eigen::MatrixXd& points, Eigen::MatrixXd& A, Eigen::MatrixXd& B) const {
  A.resize(static_cast<Eigen::Index>(n_outputs_), points.cols());
  B.resize(static_cast<Eigen::Index>(n_outputs_), points.cols());
  std::vector<Jet> p(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index d = 0; d < points.rows(); ++d) p[d] = Jet(points(d, j));
    const TransformAt t = at(p);
    for (std::size_t o = 0; o < n_outputs_; ++o) {
      A(static_cast<Eigen::Index>(o), j) = t.A[o].value;
      B(static_cast<Eigen::Index>(o), j) = t.B[o].value;
    }
  }
}

double ProblemSpec::coeff(const std::string& key) const {
  auto it = coefficients.find(key);
  if (it == coefficients.end()) throw ConfigError("problem '" + name + "' has no coefficient '" + key + "'");
  return it->second;
}

void ProblemSpec::validate() const {
  if (train_domain.size() != n_inputs || extrap_domain.size() != n_inputs) {
    throw ConfigError("domain dimension does not match the number of inputs");
  }
  bool strict = false;
  for (std::size_t d = 0; d < n_inputs; ++d) {
    const Interval& tr = train_domain[d];
    const Interval& ex = extrap_domain[d];
    if (!(tr.lo < tr.hi)) throw ConfigError("empty training interval");
    if (ex.lo > tr.lo || ex.hi < tr.hi) throw ConfigError("extrapolation domain must contain the training domain");
    if (ex.lo < tr.lo || ex.hi > tr.hi) strict = true;
  }
  if (!strict) throw ConfigError("extrapolation domain must extend the training domain");
  for (const auto& [key, v] : coefficients) {
    if (!std::isfinite(v)) throw ConfigError("coefficient '" + key + "' is not finite");
  }
  if (kind == ProblemKind::Burgers && !(coeff("visc") > 0.0)) throw ConfigError("visc must be positive");
  for (const Condition& c : conditions) {
    const Interval& tr = train_domain.at(c.axis);
    if (c.coordinate != tr.lo && c.coordinate != tr.hi) {
      throw ConfigError("condition location is not on the training-domain boundary");
    }
  }
}

int ProblemSpec::required_order() const {
  return (kind == ProblemKind::Duffing || kind == ProblemKind::Burgers) ? 2 : 1;
}

std::vector<std::size_t> ProblemSpec::seeded_axes() const {
  if (kind == ProblemKind::Burgers) return {0, 1};
  return {0};
}

bool ProblemSpec::in_train_domain(std::span<const double> point) const {
  for (std::size_t d = 0; d < n_inputs; ++d) {
    if (!train_domain[d].contains(point[d])) return false;
  }
  return true;
}

std::vector<std::string> preset_names() { return {"linear_ode", "duffing", "lotka_volterra", "burgers"}; }

namespace {

std::function<double(std::span<const double>)> constant_value(double v) {
  return [v](std::span<const double>) { return v; };
}

// 1 - exp(-(t - t0)) as a jet.
Jet ramp(const Jet& t, double t0) { return 1.0 - exp(-(t - t0)); }

// sin(pi x) with exact zeros at integer x (std::sin(pi) is 1.2e-16, not 0).
Jet sin_pi(const Jet& x) {
  const double r = std::remainder(x.value, 2.0);
  const double s = (r == 0.0 || std::abs(r) == 1.0) ? 0.0 : std::sin(std::numbers::pi * r);
  const double c = std::cos(std::numbers::pi * r);
  constexpr double pi = std::numbers::pi;
  return chain(x, s, pi * c, -pi * pi * s);
}

}  // namespace

void rebuild_problem(ProblemSpec& p) {
  p.conditions.clear();
  switch (p.kind) {
    case ProblemKind::LinearOde: {
      const double t0 = p.coeff("t0"), u0 = p.coeff("u0");
      p.conditions.push_back({ConditionKind::InitialValue, 0, t0, 0, constant_value(u0)});
      p.transform = Transform(1, [t0, u0](std::span<const Jet> x) {
        return TransformAt{{Jet(u0)}, {ramp(x[0], t0)}};
      });
      break;
    }
    case ProblemKind::Duffing: {
      const double t0 = p.coeff("t0"), u0 = p.coeff("u0"), du0 = p.coeff("du0");
      p.conditions.push_back({ConditionKind::InitialValue, 0, t0, 0, constant_value(u0)});
      p.conditions.push_back({ConditionKind::InitialDerivative, 0, t0, 0, constant_value(du0)});
      p.transform = Transform(1, [t0, u0, du0](std::span<const Jet> x) {
        const Jet e = ramp(x[0], t0);
        return TransformAt{{u0 + du0 * e}, {e * e}};
      });
      break;
    }
    case ProblemKind::LotkaVolterra: {
      const double t0 = p.coeff("t0"), u0 = p.coeff("u0"), v0 = p.coeff("v0");
      p.conditions.push_back({ConditionKind::InitialValue, 0, t0, 0, constant_value(u0)});
      p.conditions.push_back({ConditionKind::InitialValue, 0, t0, 1, constant_value(v0)});
      p.transform = Transform(2, [t0, u0, v0](std::span<const Jet> x) {
        const Jet e = ramp(x[0], t0);
        return TransformAt{{Jet(u0), Jet(v0)}, {e, e}};
      });
      break;
    }
    case ProblemKind::Burgers: {
      const double x_lo = p.train_domain[0].lo, x_hi = p.train_domain[0].hi;
      const double t0 = p.train_domain[1].lo;
      auto initial = [](std::span<const double> pt) { return -sin_pi(Jet(pt[0])).value; };
      p.conditions.push_back({ConditionKind::InitialValue, 1, t0, 0, initial});
      p.conditions.push_back({ConditionKind::Dirichlet, 0, x_lo, 0, constant_value(0.0)});
      p.conditions.push_back({ConditionKind::Dirichlet, 0, x_hi, 0, constant_value(0.0)});
      p.transform = Transform(1, [x_lo, x_hi, t0](std::span<const Jet> x) {
        const Jet a = -sin_pi(x[0]);
        const Jet b = ramp(x[1], t0) * ramp(x[0], x_lo) * (1.0 - exp(x[0] - x_hi));
        return TransformAt{{a}, {b}};
      });
      break;
    }
  }
}

ProblemSpec make_preset(const std::string& name, bool lv_standard_form) {
  ProblemSpec p;
  p.name = name;
  if (name == "linear_ode") {
    p.kind = ProblemKind::LinearOde;
    p.input_names = {"t"};
    p.coefficients = {{"u0", 1.0}, {"t0", 0.0}};
    p.train_domain = {{0.0, 2.0}};
    p.extrap_domain = {{0.0, 3.0}};
  } else if (name == "duffing") {
    p.kind = ProblemKind::Duffing;
    p.input_names = {"t"};
    p.coefficients = {{"omega", 1.0}, {"eps_nl", 0.1}, {"u0", 1.0}, {"du0", 0.0}, {"t0", 0.0}};
    p.train_domain = {{0.0, 2.0}};
    p.extrap_domain = {{0.0, 3.0}};
  } else if (name == "lotka_volterra") {
    p.kind = ProblemKind::LotkaVolterra;
    p.n_outputs = 2;
    p.input_names = {"t"};
    p.coefficients = {{"lv_alpha", 1.0}, {"lv_beta", 1.0}, {"lv_delta", 1.0}, {"lv_gamma", 1.0},
                      {"u0", 1.0},       {"v0", 1.5},      {"t0", 0.0}};
    p.lv_standard_form = lv_standard_form;
    p.train_domain = {{0.0, 3.0}};
    p.extrap_domain = {{0.0, 4.5}};
  } else if (name == "burgers") {
    p.kind = ProblemKind::Burgers;
    p.n_inputs = 2;
    p.input_names = {"x", "t"};
    p.coefficients = {{"visc", 0.1}};
    p.train_domain = {{-1.0, 1.0}, {0.0, 1.0}};
    p.extrap_domain = {{-1.0, 1.0}, {0.0, 1.5}};
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
  }
  rebuild_problem(p);
  p.validate();
  return p;
}

template <class T>
std::vector<T> residual(const ProblemSpec& p, const PassJets<T>& passes, int order,
                        std::span<const double> point) {
  if (order < p.required_order()) {
    throw StructuralError("residual of '" + p.name + "' needs derivative order " +
                          std::to_string(p.required_order()));
  }
  if (passes.size() < p.seeded_axes().size()) throw StructuralError("residual: missing seeded pass");
  for (const auto& pass : passes) {
    if (pass.size() != p.n_outputs) throw StructuralError("residual: output count mismatch");
  }
  switch (p.kind) {
    case ProblemKind::LinearOde: {
      const Jet2<T>& u = passes[0][0];
      return {u.d1 + T(2.0 * point[0]) * u.value};
    }
    case ProblemKind::Duffing: {
      const Jet2<T>& u = passes[0][0];
      const double w = p.coeff("omega");
      return {u.d2 + T(w * w) * u.value + T(p.coeff("eps_nl")) * u.value * u.value * u.value};
    }
    case ProblemKind::LotkaVolterra: {
      const Jet2<T>& u = passes[0][0];
      const Jet2<T>& v = passes[0][1];
      const T a(p.coeff("lv_alpha")), b(p.coeff("lv_beta"));
      const T d(p.coeff("lv_delta")), g(p.coeff("lv_gamma"));
      const T uv = u.value * v.value;
      const T r1 = u.d1 - a * u.value + b * uv;
      if (p.lv_standard_form) return {r1, v.d1 - d * uv + g * v.value};
      return {r1, v.d1 + d * u.value - g * uv};
    }
    case ProblemKind::Burgers: {
      const Jet2<T>& ux = passes[0][0];  // x seeded
      const Jet2<T>& ut = passes[1][0];  // t seeded
      return {ut.d1 + ux.value * ux.d1 - T(p.coeff("visc")) * ux.d2};
    }
  }
  throw StructuralError("unknown problem kind");
}

template std::vector<double> residual<double>(const ProblemSpec&, const PassJets<double>&, int,
                                              std::span<const double>);
template std::vector<Var> residual<Var>(const ProblemSpec&, const PassJets<Var>&, int,
                                        std::span<const double>);

std::vector<Jet> point_jets(std::span<const double> point, std::size_t seeded_axis) {
  std::vector<Jet> out;
  out.reserve(point.size());
  for (std::size_t d = 0; d < point.size(); ++d) out.push_back(seed_input(point[d], d == seeded_axis));
  return out;
}

Eigen::MatrixXd condition_points(const ProblemSpec& p, const Condition& c, std::size_t n) {
  if (p.n_inputs == 1) {
    Eigen::MatrixXd pts(1, 1);
    pts(0, 0) = c.coordinate;
    return pts;
  }
  const std::size_t free_axis = c.axis == 0 ? 1 : 0;
  const Interval& range = p.extrap_domain[free_axis];
  Eigen::MatrixXd pts(2, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double s = n == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(n - 1);
    pts(static_cast<Eigen::Index>(c.axis), static_cast<Eigen::Index>(j)) = c.coordinate;
    pts(static_cast<Eigen::Index>(free_axis), static_cast<Eigen::Index>(j)) = range.lo + s * range.width();
  }
  return pts;
}

}  // namespace deuq
