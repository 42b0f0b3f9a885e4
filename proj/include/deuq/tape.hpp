#pragma once

// Reverse-mode differentiation over a linear record (Wengert list) of scalar
// operations. Each recorded node has at most two parents together with the
// local partial derivatives, so the backward sweep is a single reverse pass.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace deuq {

class Tape;

// A scalar that is either recorded on a tape or a plain constant (no tape).
class Var {
 public:
  static constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit by design of jet templates

  double value() const { return value_; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value)
      : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = kConstant;
  double value_ = 0.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Independent variable (a parameter or any leaf that needs an adjoint).
  Var variable(double value);

  // Node with one or two parents; an absent parent is a constant Var.
  Var record(double value, const Var& a, double da);
  Var record(double value, const Var& a, double da, const Var& b, double db);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Adjoints of `output` with respect to every node on the tape.
  std::vector<double> adjoints(const Var& output) const;

  // Adjoints of `output` with respect to `wrt`. Every entry of `wrt` must be
  // recorded on this tape, otherwise StructuralError.
  std::vector<double> gradient(const Var& output, std::span<const Var> wrt) const;

 private:
  struct Node {
    std::array<std::uint32_t, 2> parent;
    std::array<double, 2> partial;
  };
  std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);
Var log1p(const Var& a);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

// Objective recorded on a fresh tape from the given parameter variables.
using TapeObjective = std::function<Var(Tape&, std::span<const Var>)>;

// Records `objective` at `params` and returns its reverse-mode gradient.
std::vector<double> grad_params(const TapeObjective& objective, std::span<const double> params);

// Objective value at `params` without keeping the record.
double evaluate_objective(const TapeObjective& objective, std::span<const double> params);

// Max over parameters of |g_rev - g_fd| / max(1, |g_fd|), where g_fd is the
// central difference with the given step. step must be > 0.
double finite_diff_check(const TapeObjective& objective, std::span<const double> params,
                         double step);

}  // namespace deuq
