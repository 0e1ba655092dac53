#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "iccbf/env.hpp"
#include "iccbf/inspection_env.hpp"
#include "iccbf/scenarios.hpp"

using Catch::Approx;
using namespace iccbf;

namespace {

// Trapezoid on 10x as many propagation samples as the arc itself.
double refined_score(const InspectionProblem& ip, const Eigen::VectorXd& x, double t, const Eigen::Vector3d& u,
                     double burn, double coast) {
  std::vector<double> times{t};
  std::vector<Eigen::VectorXd> states{x};
  auto extend = [&](const Eigen::VectorXd& uu, double dur, int n) {
    const auto tr = propagate_zoh_trace(ip.model, states.back(), uu, dur, PropagatorConfig{n});
    const double t0 = times.back();
    for (std::size_t k = 1; k < tr.size(); ++k) {
      times.push_back(t0 + dur * static_cast<double>(k) / n);
      states.push_back(tr[k]);
    }
  };
  extend(u, burn, 10 * ip.settings.burn_substeps);
  extend(Eigen::Vector3d::Zero(), coast, 10 * static_cast<int>(std::ceil(coast / ip.settings.coast_substep - 1e-9)));
  return inspection_score_increment(ip.params, times, states);
}

}  // namespace

TEST_CASE("cruise grid split", "[scenarios]") {
  const auto pb = cruise_problem();
  CHECK(pb.grid.size() == 325);
  CHECK(pb.grid.points.front().x.isApprox(Eigen::Vector2d(0.0, 0.0)));
  CHECK(pb.grid.points[25].x.isApprox(Eigen::Vector2d(10.0, 0.0)));
  CHECK(pb.grid.count(SetTag::kD) == 254);
  CHECK(pb.grid.count(SetTag::kE) == 5);
  CHECK(pb.grid.count(SetTag::kUnsafe) == 66);
  for (const auto& p : pb.grid.points) {
    const ChainMembership m = pb.chain.membership(p.x);
    CHECK((p.tag == SetTag::kD) == m.in_Cstar);
    CHECK((p.tag == SetTag::kUnsafe) == !m.in_S);
  }
}

TEST_CASE("docking starts", "[scenarios]") {
  const DockingParams p;
  const auto pb = docking_problem();
  CHECK(pb.grid.size() == 100);
  CHECK(pb.grid.count(SetTag::kD) == 54);
  CHECK(pb.grid.count(SetTag::kE) == 46);
  CHECK(pb.grid.count(SetTag::kUnsafe) == 0);

  const InitialGrid g = docking_initials(p);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Eigen::VectorXd& x = g.points[j].x;
    CHECK(x[0] == p.standoff);
    CHECK(x.tail(3).norm() == 0.0);
    const double th = -p.cone_half_angle + 2.0 * p.cone_half_angle * static_cast<double>(j) / 99.0;
    CHECK(std::atan2(x[1], x[0] - p.port_radius) == Approx(th).margin(1e-12));
  }
  // Symmetric about the docking axis.
  CHECK(g.points.front().x[1] == Approx(-g.points.back().x[1]));

  const InitialGrid lit = docking_initials(p, LateralOffset::kLiteral);
  CHECK(lit.points[10].x[1] == Approx(p.standoff / std::tan(-p.cone_half_angle + 2.0 * p.cone_half_angle * 10 / 99.0)));
  CHECK_THROWS(docking_initials(p, LateralOffset::kFromPort, 1));
}

TEST_CASE("inspection starts", "[scenarios][inspection]") {
  const InspectionParams p;
  const auto r0 = inspection_r0_sweep(p);
  REQUIRE(r0.size() == 100);
  CHECK(r0.front() == p.r_min);
  CHECK(r0.back() == Approx(p.r_max));
  const InitialGrid g = inspection_initials(r0, p);
  const double n = p.orbit.mean_motion();
  for (const auto& pt : g.points) {
    CHECK(pt.x[4] == Approx(-2.0 * n * pt.x[0]));
    CHECK(pt.x[5] == p.initial_vz);
  }
  CHECK_THROWS(inspection_initials({10.0}, p));
  const auto ip = inspection_problem();
  CHECK(ip.grid.count(SetTag::kD) == 100);
}

TEST_CASE("illumination geometry", "[scenarios][inspection]") {
  const InspectionParams p;
  const double n = p.orbit.mean_motion();
  CHECK(sun_direction_lvlh(p, 0.0).isApprox(Eigen::Vector3d::UnitX()));
  // A quarter orbit later the inertial +x direction appears at -y in LVLH.
  CHECK((sun_direction_lvlh(p, 0.5 * std::numbers::pi / n) - Eigen::Vector3d(0.0, -1.0, 0.0)).norm() < 1e-12);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  x[0] = 100.0;
  CHECK(gamma_angle(p, x, 0.0) == Approx(0.0).margin(1e-12));
  x << 0.0, 0.0, 100.0, 0, 0, 0;
  CHECK(gamma_angle(p, x, 0.0) == Approx(std::numbers::pi / 2));
  CHECK_THROWS_AS(gamma_angle(p, Eigen::VectorXd::Zero(6), 0.0), SingularStateError);
  CHECK(distance_weight(p, 25.0) == Approx(0.5));
  CHECK(distance_weight(p, 200.0) == 1.0);
  CHECK(distance_weight(p, 600.0) == Approx(0.125));
}

TEST_CASE("score closed forms", "[scenarios][inspection]") {
  const InspectionParams p;
  const double T = 5000.0;
  const int N = 200;
  auto score = [&](auto place) {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    for (int k = 0; k <= N; ++k) {
      const double t = T * k / N;
      Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
      x.head<3>() = place(t);
      times.push_back(t);
      states.push_back(x);
    }
    return inspection_score_increment(p, times, states);
  };
  // Chaser on the shadow side, on the sunlit side, and on the orbit normal.
  CHECK(std::abs(score([&](double t) { return Eigen::Vector3d(-150.0 * sun_direction_lvlh(p, t)); })) < 1e-12);
  CHECK(std::abs(score([&](double t) { return Eigen::Vector3d(150.0 * sun_direction_lvlh(p, t)); }) - p.omega_gamma * T) <
        1e-12 * T);
  CHECK(std::abs(score([](double) { return Eigen::Vector3d(0.0, 0.0, 150.0); }) - 0.5 * p.omega_gamma * T) < 1e-12 * T);
}

TEST_CASE("score quadrature agrees with a refined one", "[scenarios][inspection]") {
  const auto ip = inspection_problem();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 8; ++k) {
    const Eigen::VectorXd x = ip.grid.points[static_cast<std::size_t>(12 * k)].x;
    const double t = 3600.0 * (1.0 + U(rng));
    const Eigen::Vector3d u = ip.params.u_max * Eigen::Vector3d(U(rng), U(rng), U(rng)).normalized();
    const double burn = burn_duration(ip.params, U(rng)), coast = coast_duration(ip.params, U(rng));
    const InspectionArc arc = propagate_arc(ip, x, t, u, burn, coast);
    const double s = inspection_score_increment(ip.params, arc.times, arc.states);
    const double ref = refined_score(ip, x, t, u, burn, coast);
    CHECK(std::abs(s - ref) <= 1e-3 * std::abs(ref));
  }
}

TEST_CASE("grid CSV", "[scenarios]") {
  const auto pb = cruise_problem();
  const auto path = std::filesystem::temp_directory_path() / "iccbf_grid_test.csv";
  write_grid_csv(path, pb.grid);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "d,v,tag");
  int rows = 0, e = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.ends_with(",E")) ++e;
  }
  CHECK(rows == 325);
  CHECK(e == 5);
  std::filesystem::remove(path);
}
