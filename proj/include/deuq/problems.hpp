#pragma once

// Benchmark differential equations, their condition-enforcing transforms
// u~ = A + B * u_raw, and reference-solution oracles.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deuq/errors.hpp"
#include "deuq/jet.hpp"

namespace deuq {

enum class ProblemKind { LinearOde, Duffing, LotkaVolterra, Burgers };

enum class ConditionKind { InitialValue, InitialDerivative, Dirichlet };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

// A condition holds on the hyperplane {point[axis] == coordinate}. For
// one-dimensional problems that is the single point t0.
struct Condition {
  ConditionKind kind = ConditionKind::InitialValue;
  std::size_t axis = 0;
  double coordinate = 0.0;
  std::size_t output = 0;
  std::function<double(std::span<const double>)> value;
};

// A and B evaluated at one point, one jet per output.
struct TransformAt {
  std::vector<Jet> A;
  std::vector<Jet> B;
};

class Transform {
 public:
  using Fn = std::function<TransformAt(std::span<const Jet>)>;

  Transform(std::size_t n_outputs, Fn fn) : n_outputs_(n_outputs), fn_(std::move(fn)) {}

  // A = 0, B = 1 for every output.
  static Transform identity(std::size_t n_outputs);

  std::size_t n_outputs() const { return n_outputs_; }

  // `point` carries coordinate jets; the seeded coordinate determines which
  // directional derivatives of A and B come back.
  TransformAt at(std::span<const Jet> point) const { return fn_(point); }

  // Values of A and B (outputs x points) at plain points (dims x points).
  void values(const Eigen::MatrixXd& points, Eigen::MatrixXd& A, Eigen::MatrixXd& B) const;

 private:
  std::size_t n_outputs_;
  Fn fn_;
};

struct ProblemSpec {
  std::string name;
  ProblemKind kind = ProblemKind::LinearOde;
  std::size_t n_inputs = 1;
  std::size_t n_outputs = 1;
  std::vector<std::string> input_names;
  std::map<std::string, double> coefficients;
  std::vector<Interval> train_domain;
  std::vector<Interval> extrap_domain;
  std::vector<Condition> conditions;
  bool lv_standard_form = false;
  Transform transform = Transform::identity(1);

  double coeff(const std::string& key) const;
  void validate() const;

  // Highest input-derivative order the residual reads.
  int required_order() const;
  // One jet pass per listed axis is needed to form the residual.
  std::vector<std::size_t> seeded_axes() const;

  bool in_train_domain(std::span<const double> point) const;
};

std::vector<std::string> preset_names();

// Throws ConfigError listing valid names for an unknown preset.
ProblemSpec make_preset(const std::string& name, bool lv_standard_form = false);

// Rebuilds the transform and condition values after coefficients changed.
void rebuild_problem(ProblemSpec& problem);

template <class T>
std::vector<Jet2<T>> enforce(std::span<const Jet2<T>> raw, const TransformAt& t) {
  if (raw.size() != t.A.size()) throw StructuralError("enforce: output count mismatch");
  std::vector<Jet2<T>> out;
  out.reserve(raw.size());
  for (std::size_t o = 0; o < raw.size(); ++o) {
    const Jet2<T> a(T(t.A[o].value), T(t.A[o].d1), T(t.A[o].d2));
    const Jet2<T> b(T(t.B[o].value), T(t.B[o].d1), T(t.B[o].d2));
    out.push_back(a + b * raw[o]);
  }
  return out;
}

// Enforced jets for each seeded pass: passes[p][o] belongs to axis
// seeded_axes()[p] and output o.
template <class T>
using PassJets = std::vector<std::vector<Jet2<T>>>;

// Residual of each equation at `point`. `order` is the highest derivative
// order carried by the jets; below required_order() is a StructuralError.
template <class T>
std::vector<T> residual(const ProblemSpec& problem, const PassJets<T>& passes, int order,
                        std::span<const double> point);

// Coordinate jets of a point with the given axis seeded.
std::vector<Jet> point_jets(std::span<const double> point, std::size_t seeded_axis);

// Points on a condition's hyperplane: the single location for ODEs, `n`
// equispaced points along the free axis (over the extrapolation domain) for
// Burgers.
Eigen::MatrixXd condition_points(const ProblemSpec& problem, const Condition& c, std::size_t n);

// Reference solution on `grid` (dims x points), outputs x points.
Eigen::MatrixXd reference_solution(const ProblemSpec& problem, const Eigen::MatrixXd& grid);

// Classical RK4 for the ODE presets with fixed step `h`, states at `times`
// (any order, each >= t0). Rows are solution components.
Eigen::MatrixXd rk4_solve(const ProblemSpec& problem, std::span<const double> times, double h);

struct BurgersGridSpec {
  std::size_t nx = 1001;
  double dt = 1e-3;
};

// Crank-Nicolson (trapezoidal in time, central in space, Picard iteration on
// the advection term) with linear interpolation onto `grid` (x, t rows).
Eigen::VectorXd burgers_reference(const ProblemSpec& problem, const Eigen::MatrixXd& grid,
                                  BurgersGridSpec spec = {});

}  // namespace deuq
