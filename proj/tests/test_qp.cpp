#include <catch_amalgamated.hpp>

#include <random>

#include "iccbf/qp.hpp"
#include "iccbf/qp_assembly.hpp"
#include "iccbf/qp_oracle.hpp"
#include "random_qp.hpp"

using Catch::Approx;
using namespace iccbf;

namespace {

IneqRow row(Eigen::VectorXd a, Eigen::VectorXd s, double rhs) {
  IneqRow r;
  r.a_u = std::move(a);
  r.a_slack = std::move(s);
  r.rhs = rhs;
  return r;
}

}  // namespace

TEST_CASE("inactive rows leave the control at zero", "[qp]") {
  ConvexSubproblem p;
  p.m = 2;
  p.input_set = InputSet::norm_ball(2, 1.0);
  p.n_slack = 1;
  p.slack_penalties = Eigen::VectorXd::Constant(1, 10.0);
  p.rows.push_back(row(Eigen::Vector2d(1.0, 0.0), Eigen::VectorXd::Constant(1, 1.0), -0.5));
  const Solution s = solve(p);
  CHECK(s.status == SolveStatus::kOptimal);
  CHECK(s.u.norm() < 1e-7);
  CHECK(s.slacks[0] == Approx(0.0).margin(1e-7));
}

TEST_CASE("a binding half-plane gives the minimum-norm point", "[qp]") {
  ConvexSubproblem p;
  p.m = 2;
  p.input_set = InputSet::norm_ball(2, 5.0);
  p.rows.push_back(row(Eigen::Vector2d(3.0, 4.0), Eigen::VectorXd(0), 10.0));
  const Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::kOptimal);
  CHECK(s.u[0] == Approx(1.2).epsilon(1e-6));
  CHECK(s.u[1] == Approx(1.6).epsilon(1e-6));
  CHECK(s.objective == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("cheap slack is used instead of control", "[qp]") {
  // min 1/2 u^2 + p s  s.t. u + s >= 1, |u| <= 10. Optimum u = min(p, 1).
  for (double pen : {0.25, 0.5, 2.0}) {
    ConvexSubproblem p;
    p.m = 1;
    p.input_set = InputSet::box(Eigen::VectorXd::Constant(1, 10.0));
    p.n_slack = 1;
    p.slack_penalties = Eigen::VectorXd::Constant(1, pen);
    p.rows.push_back(row(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0), 1.0));
    const Solution s = solve(p);
    CHECK(s.u[0] == Approx(std::min(pen, 1.0)).epsilon(1e-6));
    CHECK(s.slacks[0] == Approx(1.0 - std::min(pen, 1.0)).margin(1e-6));
  }
}

TEST_CASE("the input bound caps the control", "[qp]") {
  ConvexSubproblem p;
  p.m = 2;
  p.input_set = InputSet::norm_ball(2, 1.0);
  p.n_slack = 1;
  p.slack_penalties = Eigen::VectorXd::Constant(1, 1e3);
  p.rows.push_back(row(Eigen::Vector2d(0.0, 1.0), Eigen::VectorXd::Constant(1, 1.0), 3.0));
  const Solution s = solve(p);
  CHECK(s.status == SolveStatus::kOptimal);
  CHECK(s.u[1] == Approx(1.0).epsilon(1e-6));
  CHECK(s.slacks[0] == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("infeasible programs return the least-violation point", "[qp]") {
  // A negative slack coefficient (CBF row with h < 0) only tightens the row.
  ConvexSubproblem p;
  p.m = 1;
  p.input_set = InputSet::box(Eigen::VectorXd::Constant(1, 1.0));
  p.n_slack = 1;
  p.slack_penalties = Eigen::VectorXd::Constant(1, 1e3);
  p.rows.push_back(row(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -0.5), 2.0));
  const Solution s = solve(p);
  CHECK(s.status == SolveStatus::kInfeasibleDiagnostic);
  CHECK(s.u.allFinite());
  CHECK(s.u[0] == Approx(1.0).epsilon(1e-4));
  CHECK(s.slacks[0] == Approx(0.0).margin(1e-4));
}

TEST_CASE("malformed programs are rejected", "[qp]") {
  ConvexSubproblem p;
  p.m = 2;
  p.input_set = InputSet::norm_ball(3, 1.0);
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
  p.input_set = InputSet::norm_ball(2, 1.0);
  p.n_slack = 1;
  p.slack_penalties = Eigen::VectorXd::Constant(1, -1.0);
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
  p.slack_penalties[0] = 1.0;
  p.rows.push_back(row(Eigen::Vector3d(1, 2, 3), Eigen::VectorXd::Zero(1), 0.0));
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
}

TEST_CASE("random programs agree with the enumeration oracle", "[qp][oracle]") {
  std::mt19937_64 rng(11);
  int nonopt = 0;
  for (int t = 0; t < 150; ++t) {
    const ConvexSubproblem p = testing::random_qp(t, rng);
    const Solution s = solve(p);
    const Solution o = brute_force_solve(p);
    if (s.status != SolveStatus::kOptimal) ++nonopt;
    INFO("program " << t);
    CHECK(p.max_violation(s.u, s.slacks) < 1e-6);
    CHECK(std::abs(s.objective - o.objective) / (1.0 + std::abs(o.objective)) < 1e-4);
    CHECK(p.input_set.contains(s.u, 1e-7));
  }
  CHECK(nonopt == 0);
}

TEST_CASE("polygonal cross-check approaches the ball solution", "[qp]") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 60; t += 3) {
    ConvexSubproblem p = testing::random_qp(t + 1, rng);  // m = 2
    if (p.input_set.kind() != InputSet::Kind::kNormBall) continue;
    const Solution a = solve(p);
    const Solution b = solve_polygonal(p, 256);
    // The inscribed polygon is a restriction, so its optimum can only be worse.
    CHECK(b.objective >= a.objective - 1e-6 * (1.0 + std::abs(a.objective)));
    CHECK(std::abs(b.objective - a.objective) < 1e-2 * (1.0 + std::abs(a.objective)));
  }
}

TEST_CASE("benchmark program rows", "[qp][assembly]") {
  FieldSample h{0.5, {-0.2, Eigen::Vector2d(1.0, 0.0)}};
  FieldSample v{2.0, {0.3, Eigen::Vector2d(0.0, 2.0)}};
  const ConvexSubproblem p = benchmark_qp(h, v, 3.0, 0.5, InputSet::norm_ball(2, 1.0));
  REQUIRE(p.rows.size() == 2);
  // CBF: Lf h + Lg h u + (alpha + gamma) h >= 0
  CHECK(p.rows[0].a_u.isApprox(Eigen::Vector2d(1.0, 0.0)));
  CHECK(p.rows[0].a_slack[1] == 0.5);
  CHECK(p.rows[0].rhs == Approx(0.2 - 1.5));
  // CLF: -Lf V - Lg V u - beta V + delta >= 0
  CHECK(p.rows[1].a_u.isApprox(Eigen::Vector2d(0.0, -2.0)));
  CHECK(p.rows[1].a_slack[0] == 1.0);
  CHECK(p.rows[1].rhs == Approx(0.3 + 1.0));
  CHECK(p.slack_penalties.isApprox(Eigen::Vector2d(1e3, 1e3)));
}
