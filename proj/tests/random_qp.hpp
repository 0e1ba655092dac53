#pragma once

// Random safety-filter programs for solver cross-checks: 1-3 inputs, box or
// ball input set, up to four rows, most of them slacked. Hard rows are built
// around an interior point so every program is feasible.

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "iccbf/qp.hpp"

namespace iccbf::testing {

inline ConvexSubproblem random_qp(int t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0), unit(0.0, 1.0);
  ConvexSubproblem p;
  p.m = 1 + t % 3;
  const int nr = t % 5;
  const bool ball = (t / 3) % 2 == 0 && p.m > 1;
  const double r = 0.1 + 2.0 * unit(rng);
  Eigen::VectorXd b(p.m);
  for (int i = 0; i < p.m; ++i) b[i] = 0.1 + 2.0 * unit(rng);
  p.input_set = ball ? InputSet::norm_ball(p.m, r) : InputSet::box(b);
  const Eigen::VectorXd u0 =
      0.8 * p.input_set.project(Eigen::VectorXd::NullaryExpr(p.m, [&] { return 2.0 * sym(rng); }));
  std::vector<bool> slacked;
  for (int i = 0; i < nr; ++i) slacked.push_back(unit(rng) < 0.7);
  p.n_slack = static_cast<int>(std::count(slacked.begin(), slacked.end(), true));
  p.slack_penalties.resize(p.n_slack);
  for (int j = 0; j < p.n_slack; ++j) p.slack_penalties[j] = std::pow(10.0, 3.0 * unit(rng));
  int k = 0;
  for (int i = 0; i < nr; ++i) {
    IneqRow row;
    row.a_u = Eigen::VectorXd::NullaryExpr(p.m, [&] { return 3.0 * sym(rng); });
    row.a_slack = Eigen::VectorXd::Zero(p.n_slack);
    if (slacked[static_cast<std::size_t>(i)]) {
      row.a_slack[k++] = 0.1 + 5.0 * unit(rng);
      row.rhs = 3.0 * sym(rng);
    } else {
      row.rhs = row.a_u.dot(u0) - 0.5 * unit(rng);
    }
    p.rows.push_back(row);
  }
  return p;
}

}  // namespace iccbf::testing
