#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "deuq/problems.hpp"

namespace deuq {

namespace {

using State = Eigen::VectorXd;

State ode_rhs(const ProblemSpec& p, double t, const State& s) {
  State ds(s.size());
  switch (p.kind) {
    case ProblemKind::LinearOde:
      ds[0] = -2.0 * t * s[0];
      break;
    case ProblemKind::Duffing: {
      const double w = p.coeff("omega");
      ds[0] = s[1];
      ds[1] = -w * w * s[0] - p.coeff("eps_nl") * s[0] * s[0] * s[0];
      break;
    }
    case ProblemKind::LotkaVolterra: {
      const double a = p.coeff("lv_alpha"), b = p.coeff("lv_beta");
      const double d = p.coeff("lv_delta"), g = p.coeff("lv_gamma");
      const double u = s[0], v = s[1];
      ds[0] = a * u - b * u * v;
      ds[1] = p.lv_standard_form ? d * u * v - g * v : -d * u + g * u * v;
      break;
    }
    case ProblemKind::Burgers:
      throw StructuralError("rk4 does not apply to a PDE preset");
  }
  return ds;
}

State initial_state(const ProblemSpec& p) {
  switch (p.kind) {
    case ProblemKind::LinearOde: return State::Constant(1, p.coeff("u0"));
    case ProblemKind::Duffing: return (State(2) << p.coeff("u0"), p.coeff("du0")).finished();
    case ProblemKind::LotkaVolterra: return (State(2) << p.coeff("u0"), p.coeff("v0")).finished();
    case ProblemKind::Burgers: break;
  }
  throw StructuralError("no initial state for a PDE preset");
}

void check_inside(const ProblemSpec& p, const Eigen::MatrixXd& grid) {
  if (static_cast<std::size_t>(grid.rows()) != p.n_inputs) throw StructuralError("grid dimension mismatch");
  const double slack = 1e-12;
  for (Eigen::Index j = 0; j < grid.cols(); ++j) {
    for (std::size_t d = 0; d < p.n_inputs; ++d) {
      const Interval& e = p.extrap_domain[d];
      const double x = grid(static_cast<Eigen::Index>(d), j);
      if (x < e.lo - slack || x > e.hi + slack) throw DomainError("grid point outside the extrapolation domain");
    }
  }
}

// Tridiagonal solve; sub/diag/sup/rhs are overwritten.
void thomas(std::vector<double>& sub, std::vector<double>& diag, std::vector<double>& sup,
            std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

}  // namespace

Eigen::MatrixXd rk4_solve(const ProblemSpec& p, std::span<const double> times, double h) {
  if (!(h > 0.0)) throw ConfigError("rk4 step must be positive");
  const double t0 = p.coeff("t0");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  Eigen::MatrixXd out(static_cast<Eigen::Index>(p.n_outputs), static_cast<Eigen::Index>(times.size()));
  State s = initial_state(p);
  double t = t0;
  for (std::size_t idx : order) {
    const double target = times[idx];
    if (target < t0) throw DomainError("rk4 target time precedes the initial time");
    const double span = target - t;
    const auto steps = static_cast<std::size_t>(std::ceil(span / h - 1e-9));
    if (steps > 0) {
      const double dt = span / static_cast<double>(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        const State k1 = ode_rhs(p, t, s);
        const State k2 = ode_rhs(p, t + 0.5 * dt, s + 0.5 * dt * k1);
        const State k3 = ode_rhs(p, t + 0.5 * dt, s + 0.5 * dt * k2);
        const State k4 = ode_rhs(p, t + dt, s + dt * k3);
        s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
        if (!s.allFinite()) throw OracleError("rk4 produced a non-finite state");
      }
      t = target;
    }
    // Duffing's second state component is the velocity, not an output.
    out.col(static_cast<Eigen::Index>(idx)) = s.head(static_cast<Eigen::Index>(p.n_outputs));
  }
  return out;
}

Eigen::VectorXd burgers_reference(const ProblemSpec& p, const Eigen::MatrixXd& grid, BurgersGridSpec spec) {
  if (p.kind != ProblemKind::Burgers) throw StructuralError("burgers_reference needs the burgers preset");
  if (spec.nx < 3 || !(spec.dt > 0.0)) throw ConfigError("invalid Burgers reference grid");
  const double nu = p.coeff("visc");
  const double x_lo = p.train_domain[0].lo, x_hi = p.train_domain[0].hi;
  const std::size_t nx = spec.nx;
  const double dx = (x_hi - x_lo) / static_cast<double>(nx - 1);

  std::vector<double> u(nx);
  for (std::size_t i = 0; i < nx; ++i) u[i] = -std::sin(std::numbers::pi * (x_lo + dx * static_cast<double>(i)));
  u.front() = 0.0;
  u.back() = 0.0;

  // F(u)_i = -u_i (u_{i+1} - u_{i-1}) / (2 dx) + nu (u_{i+1} - 2 u_i + u_{i-1}) / dx^2
  auto flux = [&](const std::vector<double>& v, std::size_t i) {
    return -v[i] * (v[i + 1] - v[i - 1]) / (2.0 * dx) + nu * (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
  };

  auto step = [&](double dt) {
    const std::size_t m = nx - 2;
    std::vector<double> explicit_half(m);
    for (std::size_t i = 1; i + 1 < nx; ++i) explicit_half[i - 1] = u[i] + 0.5 * dt * flux(u, i);
    std::vector<double> w = u;
    for (int it = 0; it < 100; ++it) {
      std::vector<double> sub(m), diag(m), sup(m), rhs = explicit_half;
      for (std::size_t k = 0; k < m; ++k) {
        const double wi = w[k + 1];
        sub[k] = -0.5 * dt * (wi / (2.0 * dx) + nu / (dx * dx));
        diag[k] = 1.0 + dt * nu / (dx * dx);
        sup[k] = -0.5 * dt * (-wi / (2.0 * dx) + nu / (dx * dx));
      }
      thomas(sub, diag, sup, rhs);
      double change = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        change = std::max(change, std::abs(rhs[k] - w[k + 1]));
        w[k + 1] = rhs[k];
      }
      if (!std::isfinite(change)) throw OracleError("Burgers reference produced a non-finite state");
      if (change < 1e-13) break;
    }
    u = std::move(w);
  };

  std::vector<double> t_targets;
  for (Eigen::Index j = 0; j < grid.cols(); ++j) t_targets.push_back(grid(1, j));
  std::sort(t_targets.begin(), t_targets.end());
  t_targets.erase(std::unique(t_targets.begin(), t_targets.end()), t_targets.end());

  Eigen::VectorXd out(grid.cols());
  const double t0 = p.train_domain[1].lo;
  double t = t0;
  for (double target : t_targets) {
    if (target < t0) throw DomainError("Burgers reference target precedes t0");
    const double span = target - t;
    const auto steps = static_cast<std::size_t>(std::ceil(span / spec.dt - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) step(span / static_cast<double>(steps));
    t = target;
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (grid(1, j) != target) continue;
      const double s = std::clamp((grid(0, j) - x_lo) / dx, 0.0, static_cast<double>(nx - 1));
      const auto i = std::min(static_cast<std::size_t>(s), nx - 2);
      const double f = s - static_cast<double>(i);
      out[j] = (1.0 - f) * u[i] + f * u[i + 1];
    }
  }
  return out;
}

Eigen::MatrixXd reference_solution(const ProblemSpec& p, const Eigen::MatrixXd& grid) {
  check_inside(p, grid);
  if (p.kind == ProblemKind::LinearOde) {
    const double u0 = p.coeff("u0"), t0 = p.coeff("t0");
    Eigen::MatrixXd out(1, grid.cols());
    // u' = -2 t u  =>  u(t) = u0 exp(-(t^2 - t0^2))
    for (Eigen::Index j = 0; j < grid.cols(); ++j) out(0, j) = u0 * std::exp(-(grid(0, j) * grid(0, j) - t0 * t0));
    return out;
  }
  if (p.kind == ProblemKind::Burgers) return burgers_reference(p, grid).transpose();
  std::vector<double> times(grid.row(0).begin(), grid.row(0).end());
  return rk4_solve(p, times, 1e-3);
}

}  // namespace deuq
