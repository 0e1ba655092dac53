#pragma once

// Forward-mode dual numbers. Nesting Dual<Dual<double>> yields higher
// derivatives, which the barrier chain needs: b_{k+1} contains the gradient of
// b_k, so the gradient of b_2 is a third derivative of h_0.

#include <array>
#include <cmath>
#include <concepts>
#include <type_traits>

namespace iccbf {

template <class T>
struct Dual;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

/// Scalar types a Dual<T> may be combined with: anything convertible to T
/// that is not itself a Dual of the same depth.
template <class U, class T>
concept PassiveScalar = std::is_convertible_v<U, T> && !std::is_same_v<U, Dual<T>>;

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // directional derivative

  constexpr Dual() = default;
  template <PassiveScalar<T> U>
  constexpr Dual(const U& value) : v(value), d(0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(const T& value, const T& deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <class T>
constexpr Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T>
constexpr Dual<T> operator+(const Dual<T>& a) { return a; }

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator+(const Dual<T>& a, const U& b) { return {a.v + b, a.d}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator+(const U& a, const Dual<T>& b) { return {a + b.v, b.d}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator-(const Dual<T>& a, const U& b) { return {a.v - b, a.d}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator-(const U& a, const Dual<T>& b) { return {a - b.v, -b.d}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator*(const Dual<T>& a, const U& b) { return {a.v * b, a.d * b}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator*(const U& a, const Dual<T>& b) { return {a * b.v, a * b.d}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator/(const Dual<T>& a, const U& b) { return {a.v / b, a.d / b}; }
template <class T, PassiveScalar<T> U>
constexpr Dual<T> operator/(const U& a, const Dual<T>& b) {
  return {a / b.v, -(a * b.d) / (b.v * b.v)};
}

/// Innermost double value of a (possibly nested) dual.
constexpr double value_of(double x) { return x; }
template <class T>
constexpr double value_of(const Dual<T>& x) { return value_of(x.v); }

// Comparisons act on the innermost value so that branches in templated code
// follow the primal computation.
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
constexpr bool operator<(const A& a, const B& b) { return value_of(a) < value_of(b); }
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
constexpr bool operator>(const A& a, const B& b) { return value_of(a) > value_of(b); }
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
constexpr bool operator<=(const A& a, const B& b) { return value_of(a) <= value_of(b); }
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
constexpr bool operator>=(const A& a, const B& b) { return value_of(a) >= value_of(b); }

template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos, std::sin;
  return {sin(a.v), a.d * cos(a.v)};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos, std::sin;
  return {cos(a.v), -(a.d * sin(a.v))};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, a.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  const T t = tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}
template <class T>
Dual<T> atan(const Dual<T>& a) {
  using std::atan;
  return {atan(a.v), a.d / (1.0 + a.v * a.v)};
}
template <class T>
Dual<T> acos(const Dual<T>& a) {
  using std::acos, std::sqrt;
  return {acos(a.v), -(a.d / sqrt(1.0 - a.v * a.v))};
}
template <class T>
Dual<T> atan2(const Dual<T>& y, const Dual<T>& x) {
  using std::atan2;
  const T r2 = x.v * x.v + y.v * y.v;
  return {atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2};
}
/// Power with a constant exponent.
template <class T>
Dual<T> pow(const Dual<T>& a, double p) {
  using std::pow;
  return {pow(a.v, p), a.d * (p * pow(a.v, p - 1.0))};
}
/// |a| with derivative sign(a)·a', taking sign(0) = 0.
template <class T>
Dual<T> abs(const Dual<T>& a) {
  const double s = value_of(a) > 0.0 ? 1.0 : (value_of(a) < 0.0 ? -1.0 : 0.0);
  return {s * a.v, s * a.d};
}

/// Value and gradient of a scalar function of an N-vector by N forward sweeps.
/// `fn` must accept std::array<Dual<S>, N>.
template <std::size_t N, class S, class Fn>
std::pair<S, std::array<S, N>> value_and_gradient(const Fn& fn, const std::array<S, N>& x) {
  std::array<S, N> grad{};
  S value{};
  std::array<Dual<S>, N> xd;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      xd[j] = Dual<S>(x[j], S(i == j ? 1.0 : 0.0));
    }
    const Dual<S> r = fn(xd);
    grad[i] = r.d;
    if (i == 0) value = r.v;
  }
  if constexpr (N == 0) value = fn(std::array<Dual<S>, N>{}).v;
  return {value, grad};
}

/// Jacobian (rows = outputs) of a vector function of an N-vector.
template <std::size_t M, std::size_t N, class Fn>
std::array<std::array<double, N>, M> jacobian(const Fn& fn, const std::array<double, N>& x) {
  std::array<std::array<double, N>, M> jac{};
  std::array<Dual<double>, N> xd;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) xd[j] = Dual<double>(x[j], i == j ? 1.0 : 0.0);
    const std::array<Dual<double>, M> r = fn(xd);
    for (std::size_t k = 0; k < M; ++k) jac[k][i] = r[k].d;
  }
  return jac;
}

}  // namespace iccbf
