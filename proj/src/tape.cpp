#include "deuq/tape.hpp"

#include <algorithm>
#include <cmath>

#include "deuq/errors.hpp"

namespace deuq {

namespace {

Tape* pick_tape(const Var& a, const Var& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw StructuralError("operands recorded on different tapes");
  }
  return a.tape() ? a.tape() : b.tape();
}

}  // namespace

Var Tape::variable(double value) {
  nodes_.push_back({{Var::kConstant, Var::kConstant}, {0.0, 0.0}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Var Tape::record(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  nodes_.push_back({{a.index(), Var::kConstant}, {da, 0.0}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

Var Tape::record(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  if (a.is_constant()) return record(value, b, db);
  if (b.is_constant()) return record(value, a, da);
  nodes_.push_back({{a.index(), b.index()}, {da, db}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) return adj;
  if (output.tape() != this || output.index() >= nodes_.size()) {
    throw StructuralError("output is not recorded on this tape");
  }
  adj[output.index()] = 1.0;
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    for (int k = 0; k < 2; ++k) {
      if (n.parent[k] != Var::kConstant) adj[n.parent[k]] += g * n.partial[k];
    }
  }
  return adj;
}

std::vector<double> Tape::gradient(const Var& output, std::span<const Var> wrt) const {
  for (const Var& v : wrt) {
    if (v.tape() != this || v.index() >= nodes_.size()) {
      throw StructuralError("gradient requested for a variable not recorded on this tape");
    }
  }
  const std::vector<double> adj = adjoints(output);
  std::vector<double> out(wrt.size());
  std::transform(wrt.begin(), wrt.end(), out.begin(),
                 [&](const Var& v) { return adj[v.index()]; });
  return out;
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = pick_tape(a, b);
  const double v = a.value() + b.value();
  return t ? t->record(v, a, 1.0, b, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = pick_tape(a, b);
  const double v = a.value() - b.value();
  return t ? t->record(v, a, 1.0, b, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = pick_tape(a, b);
  const double v = a.value() * b.value();
  return t ? t->record(v, a, b.value(), b, a.value()) : Var(v);
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw DomainError("division by zero");
  Tape* t = pick_tape(a, b);
  const double v = a.value() / b.value();
  return t ? t->record(v, a, 1.0 / b.value(), b, -v / b.value()) : Var(v);
}

Var operator-(const Var& a) {
  return a.tape() ? a.tape()->record(-a.value(), a, -1.0) : Var(-a.value());
}

namespace {

template <class F, class D>
Var unary(const Var& a, F f, D df) {
  const double v = f(a.value());
  return a.tape() ? a.tape()->record(v, a, df(a.value(), v)) : Var(v);
}

}  // namespace

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  if (a.value() <= 0.0) throw DomainError("log of a non-positive value");
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sin(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

Var cos(const Var& a) {
  return unary(a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Var sqrt(const Var& a) {
  if (a.value() < 0.0) throw DomainError("sqrt of a negative value");
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var abs(const Var& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x < 0.0 ? -1.0 : 1.0; });
}

Var log1p(const Var& a) {
  if (a.value() <= -1.0) throw DomainError("log1p argument <= -1");
  return unary(a, [](double x) { return std::log1p(x); },
               [](double x, double) { return 1.0 / (1.0 + x); });
}

std::vector<double> grad_params(const TapeObjective& objective, std::span<const double> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (double p : params) vars.push_back(tape.variable(p));
  const Var out = objective(tape, vars);
  return tape.gradient(out, vars);
}

double evaluate_objective(const TapeObjective& objective, std::span<const double> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (double p : params) vars.push_back(tape.variable(p));
  return objective(tape, vars).value();
}

double finite_diff_check(const TapeObjective& objective, std::span<const double> params,
                         double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  const std::vector<double> grad = grad_params(objective, params);
  std::vector<double> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = evaluate_objective(objective, probe);
    probe[i] = saved - step;
    const double down = evaluate_objective(objective, probe);
    probe[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace deuq
