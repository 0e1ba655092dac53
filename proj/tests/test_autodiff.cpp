#include <catch_amalgamated.hpp>

#include <cmath>

#include "iccbf/autodiff.hpp"
#include "iccbf/small_vec.hpp"

using Catch::Approx;
using namespace iccbf;

namespace {
double central(double (*f)(double), double x, double h = 1e-6) { return (f(x + h) - f(x - h)) / (2.0 * h); }
}  // namespace

TEST_CASE("dual elementary functions match their derivatives", "[autodiff]") {
  const double x0 = 0.37;
  const Dual<double> x(x0, 1.0);
  CHECK(sin(x).d == Approx(std::cos(x0)));
  CHECK(cos(x).d == Approx(-std::sin(x0)));
  CHECK(exp(x).d == Approx(std::exp(x0)));
  CHECK(log(x).d == Approx(1.0 / x0));
  CHECK(sqrt(x).d == Approx(0.5 / std::sqrt(x0)));
  CHECK(tanh(x).d == Approx(1.0 - std::tanh(x0) * std::tanh(x0)));
  CHECK(atan(x).d == Approx(central([](double t) { return std::atan(t); }, x0)).epsilon(1e-8));
  CHECK(acos(x).d == Approx(central([](double t) { return std::acos(t); }, x0)).epsilon(1e-8));
  CHECK(pow(x, 2.5).d == Approx(2.5 * std::pow(x0, 1.5)));
  CHECK(abs(-x).d == Approx(1.0));
  CHECK(abs(Dual<double>(0.0, 1.0)).d == 0.0);
}

TEST_CASE("quotient and product rules", "[autodiff]") {
  const Dual<double> a(2.0, 1.0), b(3.0, 0.0);
  CHECK((a * a * b).d == Approx(12.0));
  CHECK((b / a).d == Approx(-0.75));
  CHECK((a / b + 1.0).v == Approx(5.0 / 3.0));
  const Dual<double> y(1.0, 0.0), x(-1.0, 1.0);
  CHECK(atan2(y, x).d == Approx(-0.5));
}

TEST_CASE("nested duals give second derivatives", "[autodiff]") {
  using DD = Dual<Dual<double>>;
  const double x0 = 0.8;
  const DD x(Dual<double>(x0, 1.0), Dual<double>(1.0, 0.0));
  const DD f = sin(x) * x;
  // f'' = 2 cos x - x sin x
  CHECK(f.d.d == Approx(2.0 * std::cos(x0) - x0 * std::sin(x0)));
  CHECK(f.d.v == Approx(std::sin(x0) + x0 * std::cos(x0)));
}

TEST_CASE("value_and_gradient and jacobian", "[autodiff]") {
  const Vec<double, 3> x{0.5, -1.0, 2.0};
  auto [v, g] = value_and_gradient<3>(
      [](const auto& z) { return z[0] * z[1] + exp(z[2]) - safe_norm(z); }, x);
  const double n = std::sqrt(0.25 + 1.0 + 4.0);
  CHECK(v == Approx(-0.5 + std::exp(2.0) - n));
  CHECK(g[0] == Approx(-1.0 - 0.5 / n));
  CHECK(g[1] == Approx(0.5 + 1.0 / n));
  CHECK(g[2] == Approx(std::exp(2.0) - 2.0 / n));

  const auto J = jacobian<2, 2>(
      [](const auto& z) {
        using S = std::decay_t<decltype(z[0])>;
        return std::array<S, 2>{z[0] * z[1], sin(z[0])};
      },
      Vec<double, 2>{1.0, 2.0});
  CHECK(J[0][0] == Approx(2.0));
  CHECK(J[0][1] == Approx(1.0));
  CHECK(J[1][0] == Approx(std::cos(1.0)));
  CHECK(J[1][1] == 0.0);
}

TEST_CASE("safe_norm has zero derivative at the origin", "[autodiff]") {
  auto [v, g] = value_and_gradient<2>([](const auto& z) { return safe_norm(z); }, Vec<double, 2>{0.0, 0.0});
  CHECK(v == 0.0);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}
