#pragma once

// Second-order forward-mode jets along a single seeded input direction.
//
// A Jet2 holds (f, f', f'') of a scalar function of one seeded input. The
// scalar type T is either double, or Var when the jet is nested under the
// reverse-mode tape (forward-over-reverse).

#include <cmath>

#include "deuq/errors.hpp"
#include "deuq/tape.hpp"

namespace deuq {

template <class T>
struct Jet2 {
  T value{};
  T d1{};
  T d2{};

  Jet2() = default;
  Jet2(T v, T first, T second) : value(v), d1(first), d2(second) {}
  explicit Jet2(T constant) : value(constant), d1(0.0), d2(0.0) {}
};

using Jet = Jet2<double>;

inline Jet seed_input(double value, bool direction_active) {
  return Jet(value, direction_active ? 1.0 : 0.0, 0.0);
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a) {
  return {-a.value, -a.d1, -a.d2};
}

template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + T(2.0) * a.d1 * b.d1 + a.value * b.d2};
}

template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) {
  if (value_of(b.value) == 0.0) throw DomainError("jet division by a zero value");
  const T q = a.value / b.value;
  const T q1 = (a.d1 - q * b.d1) / b.value;
  const T q2 = (a.d2 - T(2.0) * q1 * b.d1 - q * b.d2) / b.value;
  return {q, q1, q2};
}

// Jet (+, -, *) plain scalar of the same type.
template <class T>
Jet2<T> operator+(const Jet2<T>& a, const T& c) {
  return {a.value + c, a.d1, a.d2};
}
template <class T>
Jet2<T> operator-(const Jet2<T>& a, const T& c) {
  return {a.value - c, a.d1, a.d2};
}
template <class T>
Jet2<T> operator+(const T& c, const Jet2<T>& a) {
  return a + c;
}
template <class T>
Jet2<T> operator-(const T& c, const Jet2<T>& a) {
  return {c - a.value, -a.d1, -a.d2};
}
template <class T>
Jet2<T> operator*(const T& c, const Jet2<T>& a) {
  return {c * a.value, c * a.d1, c * a.d2};
}
template <class T>
Jet2<T> operator*(const Jet2<T>& a, const T& c) {
  return c * a;
}

// y = f(u) with f, f', f'' evaluated at u.value.
template <class T>
Jet2<T> chain(const Jet2<T>& u, const T& f, const T& df, const T& d2f) {
  return {f, df * u.d1, d2f * u.d1 * u.d1 + df * u.d2};
}

template <class T>
Jet2<T> exp(const Jet2<T>& u) {
  using std::exp;
  const T y = exp(u.value);
  return chain(u, y, y, y);
}

template <class T>
Jet2<T> tanh(const Jet2<T>& u) {
  using std::tanh;
  const T y = tanh(u.value);
  const T dy = T(1.0) - y * y;
  return chain(u, y, dy, T(-2.0) * y * dy);
}

template <class T>
Jet2<T> sin(const Jet2<T>& u) {
  using std::cos;
  using std::sin;
  const T s = sin(u.value);
  const T c = cos(u.value);
  return chain(u, s, c, -s);
}

template <class T>
Jet2<T> cos(const Jet2<T>& u) {
  using std::cos;
  using std::sin;
  const T s = sin(u.value);
  const T c = cos(u.value);
  return chain(u, c, -s, -c);
}

template <class T>
T int_power(const T& x, int n) {
  T out(1.0);
  for (int i = 0; i < n; ++i) out = out * x;
  return out;
}

template <class T>
Jet2<T> pow_int(const Jet2<T>& u, int n) {
  if (n < 0) return Jet2<T>(T(1.0)) / pow_int(u, -n);
  if (n == 0) return Jet2<T>(T(1.0));
  if (n == 1) return u;
  const T p2 = int_power(u.value, n - 2);
  const T p1 = p2 * u.value;
  return chain(u, p1 * u.value, T(static_cast<double>(n)) * p1,
               T(static_cast<double>(n) * (n - 1)) * p2);
}

enum class ElementaryFn { Add, Mul, Neg, Exp, Tanh, Sin, PowInt, Div };

// Tag-dispatched application used by generic residual code and tests.
// Binary tags read `b`; PowInt reads `n`.
template <class T>
Jet2<T> jet_apply(ElementaryFn f, const Jet2<T>& a, const Jet2<T>& b = Jet2<T>(), int n = 1) {
  switch (f) {
    case ElementaryFn::Add: return a + b;
    case ElementaryFn::Mul: return a * b;
    case ElementaryFn::Neg: return -a;
    case ElementaryFn::Exp: return exp(a);
    case ElementaryFn::Tanh: return tanh(a);
    case ElementaryFn::Sin: return sin(a);
    case ElementaryFn::PowInt: return pow_int(a, n);
    case ElementaryFn::Div: return a / b;
  }
  throw StructuralError("unknown elementary function tag");
}

}  // namespace deuq
