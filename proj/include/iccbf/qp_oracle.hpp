#pragma once

// Reference minimizer used to check `solve`. Two independent searches are
// combined and the better feasible point wins:
//   - an exhaustive grid over U (ball points outside the sphere are pulled
//     radially onto it), slacks set to their row-wise minimal values;
//   - enumeration of every piece of the piecewise-quadratic objective: each
//     row is inactive, on its kink (a·u = rhs) or penalized, and each face
//     of U is active or not. Each piece is an equality-constrained quadratic
//     with a closed-form minimizer.
// Each slack must appear with a positive coefficient in at most one row.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "iccbf/qp.hpp"

namespace iccbf {

namespace detail {

struct OracleRow {
  std::array<double, 3> a{};
  double rhs = 0.0;
  int slack = -1;        // -1: hard row
  double coef = 0.0;     // slack coefficient in the row
  double weight = 0.0;   // penalty per unit shortfall (or per squared shortfall)
};

struct OracleProblem {
  int m = 0;
  bool quadratic = false;
  std::vector<OracleRow> rows;
  double hard_tol = 0.0;

  double eval(const double* u, bool& feasible) const {
    double obj = 0.0;
    for (int i = 0; i < m; ++i) obj += 0.5 * u[i] * u[i];
    for (const auto& r : rows) {
      double lhs = 0.0;
      for (int i = 0; i < m; ++i) lhs += r.a[static_cast<std::size_t>(i)] * u[i];
      const double sf = r.rhs - lhs;
      if (r.slack < 0) {
        if (sf > hard_tol) {
          feasible = false;
          return std::numeric_limits<double>::infinity();
        }
      } else if (sf > 0.0) {
        obj += quadratic ? r.weight * sf * sf : r.weight * sf;
      }
    }
    feasible = true;
    return obj;
  }
};

inline OracleProblem make_oracle_problem(const ConvexSubproblem& p) {
  OracleProblem op;
  op.m = p.m;
  op.quadratic = p.slack_cost == SlackCost::kQuadratic;
  std::vector<int> slack_use(static_cast<std::size_t>(p.n_slack), 0);
  double scale = 1.0;
  for (const auto& r : p.rows) {
    OracleRow o;
    for (int i = 0; i < p.m; ++i) o.a[static_cast<std::size_t>(i)] = r.a_u[i];
    o.rhs = r.rhs;
    for (int j = 0; j < p.n_slack; ++j) {
      if (r.a_slack[j] > 0.0) {
        if (o.slack >= 0) throw std::invalid_argument("oracle needs at most one slack per row");
        o.slack = j;
        o.coef = r.a_slack[j];
        o.weight = op.quadratic ? p.slack_penalties[j] / (o.coef * o.coef) : p.slack_penalties[j] / o.coef;
        ++slack_use[static_cast<std::size_t>(j)];
      }
    }
    scale = std::max(scale, std::abs(r.rhs));
    op.rows.push_back(o);
  }
  for (int c : slack_use) {
    if (c > 1) throw std::invalid_argument("oracle needs each slack in at most one row");
  }
  op.hard_tol = 1e-12 * scale;
  return op;
}

/// Minimizer of 1/2 u'Qu + g'u subject to E u = e, and |u| = r when
/// `on_sphere` (which assumes Q = I). Returns false for empty or degenerate
/// pieces.
inline bool piece_minimizer(const Eigen::MatrixXd& Q, const Eigen::VectorXd& g, const Eigen::MatrixXd& E,
                            const Eigen::VectorXd& e, bool on_sphere, double r, Eigen::VectorXd& u) {
  const int m = static_cast<int>(g.size());
  const int ne = static_cast<int>(e.size());
  if (!on_sphere) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + ne, m + ne);
    K.topLeftCorner(m, m) = Q;
    if (ne > 0) {
      K.topRightCorner(m, ne) = E.transpose();
      K.bottomLeftCorner(ne, m) = E;
    }
    Eigen::VectorXd rhs(m + ne);
    rhs.head(m) = -g;
    if (ne > 0) rhs.tail(ne) = e;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) return false;
    u = lu.solve(rhs).head(m);
    return u.allFinite();
  }
  // On the sphere: u = u0 + N z, u0 the min-norm solution of E u = e and N an
  // orthonormal basis of ker E. |u|^2 is fixed, so only g'N z matters.
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(m, m);
  if (ne > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-12 * std::max(1.0, sv[0]) ? 1 : 0;
    if (rank < ne || rank >= m) return false;
    u0 = svd.solve(e);
    N = svd.matrixV().rightCols(m - rank);
  }
  const double rest = r * r - u0.squaredNorm();
  if (rest < 0.0) return false;
  const Eigen::VectorXd ng = N.transpose() * g;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(N.cols());
  if (ng.norm() > 0.0) {
    z = -ng / ng.norm() * std::sqrt(rest);
  } else {
    z[0] = std::sqrt(rest);
  }
  u = u0 + N * z;
  return u.allFinite();
}

}  // namespace detail

inline Solution brute_force_solve(const ConvexSubproblem& p, int grid_per_axis = 201) {
  p.validate();
  if (p.m > 3) throw std::invalid_argument("brute force oracle supports m <= 3");
  if (grid_per_axis < 3) throw std::invalid_argument("grid needs at least 3 points per axis");
  const detail::OracleProblem op = detail::make_oracle_problem(p);
  const InputSet& U = p.input_set;
  const bool ball = U.kind() == InputSet::Kind::kNormBall;
  const Eigen::VectorXd half = U.bounds();

  double best_obj = std::numeric_limits<double>::infinity();
  std::array<double, 3> best_u{};
  auto consider = [&](const std::array<double, 3>& u) {
    bool feasible = false;
    const double obj = op.eval(u.data(), feasible);
    if (feasible && obj < best_obj) {
      best_obj = obj;
      best_u = u;
    }
  };

  // Grid.
  const int n = grid_per_axis;
  std::array<int, 3> counts{1, 1, 1};
  for (int i = 0; i < p.m; ++i) counts[static_cast<std::size_t>(i)] = n;
  std::array<double, 3> u{};
  for (int a = 0; a < counts[0]; ++a) {
    for (int b = 0; b < counts[1]; ++b) {
      for (int c = 0; c < counts[2]; ++c) {
        const std::array<int, 3> idx{a, b, c};
        double nrm2 = 0.0;
        for (int i = 0; i < p.m; ++i) {
          const auto s = static_cast<std::size_t>(i);
          u[s] = -half[i] + 2.0 * half[i] * idx[s] / (n - 1);
          nrm2 += u[s] * u[s];
        }
        if (ball && nrm2 > half[0] * half[0]) {
          const double f = half[0] / std::sqrt(nrm2);
          for (int i = 0; i < p.m; ++i) u[static_cast<std::size_t>(i)] *= f;
        }
        consider(u);
      }
    }
  }

  // Pieces. Row states: 0 inactive, 1 on the kink, 2 penalized (soft rows).
  const int nr = static_cast<int>(op.rows.size());
  int row_combos = 1;
  for (int i = 0; i < nr; ++i) row_combos *= 3;
  int face_states = 2;
  if (!ball) {
    face_states = 1;
    for (int i = 0; i < p.m; ++i) face_states *= 3;
  }
  auto row_vec = [&](int i) {
    Eigen::VectorXd a(p.m);
    for (int k = 0; k < p.m; ++k) a[k] = op.rows[static_cast<std::size_t>(i)].a[static_cast<std::size_t>(k)];
    return a;
  };
  for (int rc = 0; rc < row_combos; ++rc) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(p.m, p.m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.m);
    std::vector<std::pair<Eigen::VectorXd, double>> kinks;
    int code = rc;
    bool skip = false;
    for (int i = 0; i < nr && !skip; ++i) {
      const int state = code % 3;
      code /= 3;
      const auto& row = op.rows[static_cast<std::size_t>(i)];
      if (state == 1) kinks.emplace_back(row_vec(i), row.rhs);
      if (state == 2) {
        if (row.slack < 0) {
          skip = true;
        } else if (op.quadratic) {
          const Eigen::VectorXd a = row_vec(i);
          Q += 2.0 * row.weight * a * a.transpose();
          g -= 2.0 * row.weight * row.rhs * a;
        } else {
          g -= row.weight * row_vec(i);
        }
      }
    }
    if (skip) continue;
    for (int fc = 0; fc < face_states; ++fc) {
      const bool on_sphere = ball && fc == 1;
      if (on_sphere && op.quadratic) continue;
      auto eqs = kinks;
      if (!ball) {
        int fcode = fc;
        for (int k = 0; k < p.m; ++k) {
          const int st = fcode % 3;
          fcode /= 3;
          if (st == 0) continue;
          Eigen::VectorXd a = Eigen::VectorXd::Zero(p.m);
          a[k] = 1.0;
          eqs.emplace_back(a, st == 1 ? half[k] : -half[k]);
        }
      }
      if (static_cast<int>(eqs.size()) > p.m) continue;
      Eigen::MatrixXd E(static_cast<Eigen::Index>(eqs.size()), p.m);
      Eigen::VectorXd e(static_cast<Eigen::Index>(eqs.size()));
      for (std::size_t i = 0; i < eqs.size(); ++i) {
        E.row(static_cast<Eigen::Index>(i)) = eqs[i].first.transpose();
        e[static_cast<Eigen::Index>(i)] = eqs[i].second;
      }
      Eigen::VectorXd cand;
      if (!detail::piece_minimizer(Q, g, E, e, on_sphere, ball ? half[0] : 0.0, cand)) continue;
      if (!U.contains(cand, 1e-12)) continue;
      std::array<double, 3> cu{};
      for (int k = 0; k < p.m; ++k) cu[static_cast<std::size_t>(k)] = cand[k];
      consider(cu);
    }
  }

  Solution sol;
  sol.u = Eigen::VectorXd::Zero(p.m);
  sol.slacks = Eigen::VectorXd::Zero(p.n_slack);
  if (!std::isfinite(best_obj)) {
    sol.status = SolveStatus::kInfeasibleDiagnostic;
    sol.objective = std::numeric_limits<double>::infinity();
    return sol;
  }
  for (int i = 0; i < p.m; ++i) sol.u[i] = best_u[static_cast<std::size_t>(i)];
  for (const auto& r : op.rows) {
    if (r.slack < 0) continue;
    double lhs = 0.0;
    for (int i = 0; i < p.m; ++i) lhs += r.a[static_cast<std::size_t>(i)] * best_u[static_cast<std::size_t>(i)];
    sol.slacks[r.slack] = std::max(0.0, r.rhs - lhs) / r.coef;
  }
  sol.objective = p.objective(sol.u, sol.slacks);
  sol.status = SolveStatus::kOptimal;
  return sol;
}

}  // namespace iccbf
