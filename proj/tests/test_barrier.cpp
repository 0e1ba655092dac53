#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "iccbf/barrier.hpp"
#include "iccbf/iccbf_chain.hpp"

using Catch::Approx;
using namespace iccbf;

namespace {

// Hand-derived cruise chain with linear margins k0, k1.
struct CruiseChainByHand {
  CruiseParams p;
  double k0 = 4.0, k1 = 7.0;

  double b0(double d, double v) const { return d - p.headway * v; }
  double b1(double d, double v) const {
    const double drag = p.f0 + p.f1 * v + p.f2 * v * v;
    return (p.lead_speed - v) + p.headway * drag / p.mass - p.headway * p.g0 * p.u_max + k0 * b0(d, v);
  }
  double b2(double d, double v) const {
    const double drag = p.f0 + p.f1 * v + p.f2 * v * v;
    const double db1_dd = k0;
    const double db1_dv = -1.0 + p.headway * (p.f1 + 2.0 * p.f2 * v) / p.mass - k0 * p.headway;
    const double lf = db1_dd * (p.lead_speed - v) + db1_dv * (-drag / p.mass);
    return lf - std::abs(db1_dv * p.g0) * p.u_max + k1 * b1(d, v);
  }
};

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace

TEST_CASE("class-K functions", "[barrier]") {
  const auto lin = ClassKFn::linear(4.0);
  const auto pw = ClassKFn::power(2.0, 3.0);
  const auto at = ClassKFn::scaled_atan(2.0, 0.5);
  for (const auto& k : {lin, pw, at}) {
    CHECK(k(0.0) == 0.0);
    CHECK(k(-0.7) == Approx(-k(0.7)));
    double prev = k(-3.0);
    for (double s = -2.9; s <= 3.0; s += 0.1) {
      CHECK(k(s) > prev);
      prev = k(s);
    }
    const auto back = ClassKFn::parse(k.to_string());
    CHECK(back.kind() == k.kind());
    CHECK(back(1.3) == k(1.3));
  }
  CHECK(lin(0.5) == Approx(2.0));
  CHECK(pw(0.5) == Approx(0.25));
  CHECK(at(1.0) == Approx(std::atan(2.0)));
  CHECK_THROWS(ClassKFn::linear(0.0));
  CHECK_THROWS(ClassKFn::parse("cubic:3"));
  CHECK_THROWS(ClassKFn::parse("power:2"));
}

TEST_CASE("cruise chain matches the hand derivation", "[barrier][chain]") {
  const CruiseChainByHand ref;
  const BarrierChain chain = cruise_chain();
  REQUIRE(chain.depth() == 2);
  for (double d : {0.0, 35.0, 80.0, 120.0}) {
    for (double v : {0.0, 7.5, 16.0, 24.0}) {
      const Eigen::Vector2d x(d, v);
      const auto b = chain.values(x);
      CHECK(b[0] == Approx(ref.b0(d, v)).margin(1e-12));
      CHECK(b[1] == Approx(ref.b1(d, v)).margin(1e-10));
      CHECK(b[2] == Approx(ref.b2(d, v)).margin(1e-9));
    }
  }
}

TEST_CASE("chain gradients agree with finite differences", "[barrier][chain]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  const BarrierChain dock = docking_chain();
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd x(5);
    x << 300.0 + 150.0 * uni(rng), 40.0 * uni(rng), uni(rng), uni(rng), uni(rng);
    for (int i = 0; i <= dock.depth(); ++i) {
      const auto& f = dock.field(i);
      CHECK(rel_err(f.gradient(x), gradient_fd([&](const Eigen::VectorXd& z) { return f(z); }, x)) < 1e-5);
    }
  }

  const BarrierChain koz = koz_chain();
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd x(6);
    x << 200.0 * uni(rng), 200.0 * uni(rng), 200.0 * uni(rng), 0.1 * uni(rng), 0.1 * uni(rng), 0.1 * uni(rng);
    const auto& f = koz.top();
    CHECK(rel_err(f.gradient(x), gradient_fd([&](const Eigen::VectorXd& z) { return f(z); }, x)) < 1e-5);
  }
}

TEST_CASE("worst and best case margins bracket sampled controls", "[barrier]") {
  const DockingParams p;
  const auto model = docking_model(p);
  const BarrierChain chain = docking_chain(p);
  const auto& h = chain.field(1);
  const auto alpha = ClassKFn::linear(1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  Eigen::VectorXd x(5);
  x << 420.0, -30.0, -0.5, 0.8, 0.3;
  const double lo = worst_case_margin(model, h, alpha, x);
  const double hi = best_case_margin(model, h, alpha, x);
  const LieDerivatives ld = lie_derivatives(model, h, x);
  double smin = 1e300, smax = -1e300;
  for (int k = 0; k < 20000; ++k) {
    Eigen::Vector2d u(n01(rng), n01(rng));
    // Every other sample lies on the boundary circle, where the extremes are.
    u *= p.u_max * (k % 2 == 0 ? 1.0 : std::sqrt(u01(rng))) / u.norm();
    const double m = ld.lf + ld.lg.dot(u) + alpha(h(x));
    smin = std::min(smin, m);
    smax = std::max(smax, m);
  }
  REQUIRE(ld.lg.norm() > 0.0);
  CHECK(lo <= smin);
  CHECK(hi >= smax);
  const double span = hi - lo;
  CHECK(smin - lo < 1e-3 * span);
  CHECK(hi - smax < 1e-3 * span);
}

TEST_CASE("scenario fields", "[barrier]") {
  const DockingParams dp;
  const auto h = docking_h0(dp);
  Eigen::VectorXd on_axis(5);
  on_axis << 300.0, 0.0, 0.0, 0.0, 0.0;
  CHECK(h(on_axis) == Approx(1.0 - std::cos(dp.cone_half_angle)));
  Eigen::VectorXd edge(5);
  edge << dp.port_radius + 100.0 * std::cos(dp.cone_half_angle), 100.0 * std::sin(dp.cone_half_angle), 0, 0, 0;
  CHECK(h(edge) == Approx(0.0).margin(1e-12));
  Eigen::VectorXd port = Eigen::VectorXd::Zero(5);
  port[0] = dp.port_radius;
  CHECK_THROWS_AS(h(port), SingularStateError);

  const InspectionParams ip;
  const auto koz = koz_h0(ip), kiz = kiz_h0(ip);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  x[0] = ip.r_koz;
  CHECK(koz(x) == Approx(0.0).margin(1e-15));
  x[0] = ip.r_kiz;
  CHECK(kiz(x) == Approx(0.0).margin(1e-15));
  x << 321.0, -12.0, 40.0, 0.1, 0.2, 0.3;
  CHECK(koz(x) + kiz(x) == Approx(1.0));
}

TEST_CASE("membership and the pointwise condition", "[barrier][chain]") {
  const BarrierChain chain = cruise_chain();
  const auto in = chain.membership(Eigen::Vector2d(120.0, 5.0));
  CHECK(in.in_S);
  CHECK(in.in_Cstar);
  const auto unsafe = chain.membership(Eigen::Vector2d(10.0, 20.0));
  CHECK_FALSE(unsafe.in_S);
  CHECK_FALSE(unsafe.in_Cstar);
  CHECK(iccbf_condition_check(chain, Eigen::Vector2d(120.0, 5.0)));
  CHECK_THROWS(build_iccbf_chain(CruiseDynamics{}, "x", CruiseSafety{}, {}));
}
