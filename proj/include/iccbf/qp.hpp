#pragma once

// Slacked safety-filter subproblems and an interior-point solver:
//
//   minimize   1/2 |u|^2 + sum_i p_i s_i      (or p_i s_i^2)
//   subject to a_u·u + a_s·s >= rhs   (each row)
//              s >= 0,  u in U (Euclidean ball or box)
//
// The ball enters as the smooth constraint r^2 - |u|^2 >= 0, so no polyhedral
// approximation is involved. `solve_polygonal` replaces a 2-D ball by an inscribed polygon and
// exists as a cross-check.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "iccbf/dynamics.hpp"

namespace iccbf {

struct IneqRow {
  Eigen::VectorXd a_u;
  Eigen::VectorXd a_slack;
  double rhs = 0.0;
};

enum class SlackCost { kLinear, kQuadratic };

struct ConvexSubproblem {
  int m = 0;
  int n_slack = 0;
  Eigen::VectorXd slack_penalties;
  std::vector<IneqRow> rows;
  InputSet input_set = InputSet::norm_ball(1, 1.0);
  SlackCost slack_cost = SlackCost::kLinear;

  void validate() const {
    if (m < 1) throw std::invalid_argument("subproblem needs m >= 1");
    if (input_set.dim() != m) throw std::invalid_argument("input set dimension differs from m");
    if (n_slack < 0 || slack_penalties.size() != n_slack) throw std::invalid_argument("one penalty per slack");
    if (n_slack > 0 && !(slack_penalties.array() > 0.0).all()) throw std::invalid_argument("penalties must be > 0");
    for (const auto& r : rows) {
      if (r.a_u.size() != m || r.a_slack.size() != n_slack) throw std::invalid_argument("row has wrong shape");
      if (!r.a_u.allFinite() || !r.a_slack.allFinite() || !std::isfinite(r.rhs)) {
        throw std::invalid_argument("row has non-finite entries");
      }
    }
  }

  double objective(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const {
    double obj = 0.5 * u.squaredNorm();
    if (n_slack > 0) {
      obj += slack_cost == SlackCost::kLinear ? slack_penalties.dot(s)
                                              : slack_penalties.dot(s.cwiseProduct(s));
    }
    return obj;
  }

  /// Largest violation over rows and slack bounds (0 when feasible).
  double max_violation(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const {
    double v = 0.0;
    for (const auto& r : rows) v = std::max(v, r.rhs - r.a_u.dot(u) - r.a_slack.dot(s));
    if (n_slack > 0) v = std::max(v, -s.minCoeff());
    return v;
  }
};

enum class SolveStatus { kOptimal, kMaxIter, kInfeasibleDiagnostic };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIter: return "max_iter";
    case SolveStatus::kInfeasibleDiagnostic: return "infeasible_diagnostic";
  }
  return "unknown";
}

struct Solution {
  Eigen::VectorXd u;
  Eigen::VectorXd slacks;
  SolveStatus status = SolveStatus::kOptimal;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double solve_seconds = 0.0;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 200;
  int scaling_passes = 10;
  /// Weight of the squared elastic violations used when the problem turns out
  /// to be infeasible (in equilibrated units).
  double elastic_weight = 1e6;
};

namespace detail {

/// Dense convex program in scaled coordinates:
///   min 1/2 x'Px + q'x   s.t.  G x >= h,   and (optionally) |x_u| <= r.
struct ScaledProgram {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  int m = 0;              // leading block of x that lives in the input set
  bool ball = false;
  double radius = 0.0;    // ball radius in scaled units
};

struct IpmResult {
  Eigen::VectorXd x;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Primal-dual interior point method (Mehrotra predictor-corrector) with the
/// ball written as the concave constraint (r^2 - |x_u|^2)/2 >= 0.
inline IpmResult interior_point(const ScaledProgram& sp, double tol, int max_iter) {
  const int n = static_cast<int>(sp.q.size());
  const int nl = static_cast<int>(sp.h.size());
  const int nc = nl + (sp.ball ? 1 : 0);
  IpmResult res;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (nc == 0) {
    res.x = Eigen::LDLT<Eigen::MatrixXd>(sp.P + 1e-12 * Eigen::MatrixXd::Identity(n, n)).solve(-sp.q);
    res.converged = true;
    return res;
  }

  auto constraints = [&](const Eigen::VectorXd& xv) {
    Eigen::VectorXd c(nc);
    if (nl > 0) c.head(nl) = sp.G * xv - sp.h;
    if (sp.ball) c[nl] = 0.5 * (sp.radius * sp.radius - xv.head(sp.m).squaredNorm());
    return c;
  };
  auto jacobian = [&](const Eigen::VectorXd& xv) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nc, n);
    if (nl > 0) J.topRows(nl) = sp.G;
    if (sp.ball) J.block(nl, 0, 1, sp.m) = -xv.head(sp.m).transpose();
    return J;
  };

  Eigen::VectorXd s = constraints(x).cwiseMax(1.0);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(nc);
  const double scale_d = 1.0 + sp.q.lpNorm<Eigen::Infinity>();
  const double scale_p = 1.0 + (nl > 0 ? sp.h.lpNorm<Eigen::Infinity>() : 0.0) + (sp.ball ? sp.radius * sp.radius : 0.0);

  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd c = constraints(x);
    const Eigen::MatrixXd J = jacobian(x);
    Eigen::MatrixXd H = sp.P;
    if (sp.ball) H.topLeftCorner(sp.m, sp.m) += lam[nl] * Eigen::MatrixXd::Identity(sp.m, sp.m);
    const Eigen::VectorXd rd = sp.P * x + sp.q - J.transpose() * lam;
    const Eigen::VectorXd rp = c - s;
    const double mu = s.dot(lam) / nc;

    res.iterations = it;
    res.primal_residual = rp.lpNorm<Eigen::Infinity>();
    res.dual_residual = rd.lpNorm<Eigen::Infinity>();
    // Dual residual measured against the size of the terms it is made of;
    // large elastic multipliers otherwise leave it stuck at roundoff.
    const double term_d = std::max({scale_d, (sp.P * x).lpNorm<Eigen::Infinity>(),
                                    (J.transpose() * lam).lpNorm<Eigen::Infinity>()});
    if (res.primal_residual <= tol * scale_p && res.dual_residual <= tol * term_d &&
        mu <= 1e-2 * tol * std::max(1.0, term_d)) {
      res.converged = true;
      break;
    }
    if (lam.lpNorm<Eigen::Infinity>() > 1e14 || !x.allFinite()) {
      res.diverged = true;
      break;
    }

    const Eigen::VectorXd w = lam.cwiseQuotient(s);
    const Eigen::MatrixXd K = H + J.transpose() * w.asDiagonal() * J + 1e-14 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(K);

    auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dl) {
      const Eigen::VectorXd t = (lam.cwiseProduct(rp) + rc).cwiseQuotient(s);
      dx = ldlt.solve(-rd - J.transpose() * t);
      dl = w.cwiseProduct(-rp - J * dx) - rc.cwiseQuotient(s);
      ds = -(rc + s.cwiseProduct(dl)).cwiseQuotient(lam);
    };
    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
      }
      return a;
    };

    Eigen::VectorXd dx, ds, dl;
    direction(s.cwiseProduct(lam), dx, ds, dl);
    const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
    const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / nc;
    const double centering = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
    const Eigen::VectorXd rc =
        s.cwiseProduct(lam) + ds.cwiseProduct(dl) - Eigen::VectorXd::Constant(nc, centering * mu);
    direction(rc, dx, ds, dl);
    const double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lam, dl)));
    if (!(dx.allFinite() && ds.allFinite() && dl.allFinite())) {
      res.diverged = true;
      break;
    }
    x += alpha * dx;
    s += alpha * ds;
    lam += alpha * dl;
    // The ball constraint is nonlinear: re-synchronize its slack so that
    // c(x) - s does not accumulate linearization error.
    if (sp.ball) {
      const double cb = 0.5 * (sp.radius * sp.radius - x.head(sp.m).squaredNorm());
      if (cb > 0.0) s[nl] = std::max(s[nl], cb);
    }
  }
  res.x = x;
  return res;
}

/// Equilibrated copy of a subproblem: u = du * x_u, slack_j = ds_j * x_s_j,
/// each linear row divided by its largest coefficient, and the objective
/// divided by `cost`.
struct Scaling {
  double du = 1.0;
  Eigen::VectorXd ds;
  double cost = 1.0;
};

inline ScaledProgram build_scaled(const ConvexSubproblem& p, int passes, Scaling& sc, bool elastic,
                                  double elastic_weight) {
  const int m = p.m, k = p.n_slack, nr = static_cast<int>(p.rows.size());
  const int ne = elastic ? nr : 0;
  const int n = m + k + ne;
  const bool box = p.input_set.kind() == InputSet::Kind::kBox;

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  P.topLeftCorner(m, m).setIdentity();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < k; ++j) {
    if (p.slack_cost == SlackCost::kLinear) {
      q[m + j] = p.slack_penalties[j];
    } else {
      P(m + j, m + j) = 2.0 * p.slack_penalties[j];
    }
  }
  // Linear rows: p.rows, slack >= 0, elastic >= 0, box faces.
  const int nbox = box ? 2 * m : 0;
  const int nl = nr + k + ne + nbox;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nl, n);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(nl);
  for (int i = 0; i < nr; ++i) {
    const auto& r = p.rows[static_cast<std::size_t>(i)];
    G.block(i, 0, 1, m) = r.a_u.transpose();
    if (k > 0) G.block(i, m, 1, k) = r.a_slack.transpose();
    h[i] = r.rhs;
  }
  for (int j = 0; j < k + ne; ++j) G(nr + j, m + j) = 1.0;
  for (int i = 0; i < nbox; ++i) {
    const int axis = i % m;
    G(nr + k + ne + i, axis) = i < m ? -1.0 : 1.0;
    h[nr + k + ne + i] = -p.input_set.bounds()[axis];
  }

  // Column scaling: one factor for all inputs (keeps the ball round), one per
  // slack; row scaling by largest coefficient.
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  d.head(m).setConstant(p.input_set.radius());
  for (int pass = 0; pass < passes; ++pass) {
    Eigen::MatrixXd Gs = G * d.asDiagonal();
    for (int i = 0; i < nl; ++i) {
      const double rn = Gs.row(i).lpNorm<Eigen::Infinity>();
      if (rn > 0.0) Gs.row(i) /= rn;
    }
    for (int j = m; j < m + k; ++j) {
      const double cn = Gs.col(j).lpNorm<Eigen::Infinity>();
      if (cn > 0.0) d[j] /= std::sqrt(cn);
    }
  }
  sc.du = d[0];
  sc.ds = d.segment(m, k);

  ScaledProgram sp;
  sp.m = m;
  sp.P = d.asDiagonal() * P * d.asDiagonal();
  sp.q = d.cwiseProduct(q);

  sp.G = G * d.asDiagonal();
  sp.h = h;
  for (int i = 0; i < nl; ++i) {
    const double rn = sp.G.row(i).lpNorm<Eigen::Infinity>();
    if (rn > 0.0) {
      sp.G.row(i) /= rn;
      sp.h[i] /= rn;
    }
  }
  // Elastic variables enter the normalized rows with unit coefficient.
  for (int i = 0; i < ne; ++i) sp.G(i, m + k + i) = 1.0;
  sc.cost = std::max({1.0, sp.P.lpNorm<Eigen::Infinity>(), sp.q.head(m + k).lpNorm<Eigen::Infinity>()});
  sp.P /= sc.cost;
  sp.q.head(m + k) /= sc.cost;
  // Quadratic elastic cost: curvature keeps the Newton systems well posed
  // where a linear penalty would leave the elastic directions flat.
  for (int i = 0; i < ne; ++i) sp.P(m + k + i, m + k + i) = elastic_weight;
  sp.ball = !box;
  sp.radius = box ? 0.0 : p.input_set.bounds()[0] / sc.du;
  return sp;
}

inline void unscale(const ConvexSubproblem& p, const Scaling& sc, const Eigen::VectorXd& x, Solution& sol) {
  sol.u = p.input_set.project(sc.du * x.head(p.m));
  sol.slacks = sc.ds.cwiseProduct(x.segment(p.m, p.n_slack)).cwiseMax(0.0);
  sol.objective = p.objective(sol.u, sol.slacks);
}

}  // namespace detail

/// Solves the subproblem. When the rows cannot be met inside U (possible when
/// a row has no effective slack), the least-violation point of an elastic
/// reformulation is returned with status infeasible_diagnostic.
inline Solution solve(const ConvexSubproblem& p, const SolverSettings& settings = {}) {
  p.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  if (p.rows.empty() && p.n_slack == 0) {
    sol.u = Eigen::VectorXd::Zero(p.m);
    sol.slacks = Eigen::VectorXd::Zero(0);
    return sol;
  }
  detail::Scaling sc;
  const detail::ScaledProgram sp = detail::build_scaled(p, settings.scaling_passes, sc, false, 0.0);
  const detail::IpmResult r = detail::interior_point(sp, settings.tol, settings.max_iter);
  detail::unscale(p, sc, r.x, sol);
  sol.iterations = r.iterations;
  sol.primal_residual = r.primal_residual;
  sol.dual_residual = r.dual_residual;
  const double feas_tol = 1e-6 * (1.0 + [&] {
    double v = 0.0;
    for (const auto& row : p.rows) v = std::max(v, std::abs(row.rhs));
    return v;
  }());
  if (r.converged && p.max_violation(sol.u, sol.slacks) <= feas_tol) {
    sol.status = SolveStatus::kOptimal;
  } else {
    detail::Scaling se;
    const detail::ScaledProgram ep = detail::build_scaled(p, settings.scaling_passes, se, true, settings.elastic_weight);
    const detail::IpmResult er = detail::interior_point(ep, settings.tol, settings.max_iter);
    Solution alt;
    detail::unscale(p, se, er.x, alt);
    if (!(alt.u.allFinite() && alt.slacks.allFinite())) {
      alt.u = sol.u.allFinite() ? sol.u : Eigen::VectorXd::Zero(p.m);
      alt.slacks = sol.slacks.allFinite() ? sol.slacks : Eigen::VectorXd::Zero(p.n_slack);
      alt.objective = p.objective(alt.u, alt.slacks);
    }
    const double viol = p.max_violation(alt.u, alt.slacks);
    if (viol > feas_tol) {
      alt.status = SolveStatus::kInfeasibleDiagnostic;
    } else if (r.converged || er.converged) {
      alt.status = SolveStatus::kOptimal;
    } else {
      alt.status = SolveStatus::kMaxIter;
    }
    alt.iterations = r.iterations + er.iterations;
    alt.primal_residual = er.primal_residual;
    alt.dual_residual = er.dual_residual;
    sol = alt;
  }
  sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

inline Solution solve(const ConvexSubproblem& p, double tol, int max_iter) {
  SolverSettings s;
  s.tol = tol;
  s.max_iter = max_iter;
  return solve(p, s);
}

/// Cross-check path for 2-D balls: the ball is replaced by an inscribed
/// regular polygon (extra rows) inside a loose box.
inline Solution solve_polygonal(const ConvexSubproblem& p, int sides = 32, const SolverSettings& settings = {}) {
  p.validate();
  if (p.m != 2 || p.input_set.kind() != InputSet::Kind::kNormBall) {
    throw std::invalid_argument("polygonal path needs a 2-D norm ball");
  }
  const double r = p.input_set.bounds()[0];
  ConvexSubproblem q = p;
  q.input_set = InputSet::box(Eigen::VectorXd::Constant(2, r));
  const double apothem = r * std::cos(std::numbers::pi / sides);
  for (int k = 0; k < sides; ++k) {
    const double th = 2.0 * std::numbers::pi * (k + 0.5) / sides;
    IneqRow row;
    row.a_u = Eigen::Vector2d(-std::cos(th), -std::sin(th));
    row.a_slack = Eigen::VectorXd::Zero(p.n_slack);
    row.rhs = -apothem;
    q.rows.push_back(row);
  }
  Solution s = solve(q, settings);
  s.objective = p.objective(s.u, s.slacks);
  return s;
}

}  // namespace iccbf
