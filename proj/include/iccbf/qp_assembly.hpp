#pragma once

// Builders for the safety-filter subproblems. Slack order: Stage-1/2 use
// (delta for the CLF row, gamma for the CBF row); inspection Stage 1 uses
// (gamma_1, gamma_2) for the KOZ and KIZ rows.

#include <Eigen/Dense>
#include <stdexcept>

#include "iccbf/barrier.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/qp.hpp"

namespace iccbf {

/// Value and Lie derivatives of a field at one state.
struct FieldSample {
  double value = 0.0;
  LieDerivatives lie;
};

inline FieldSample sample_field(const ControlAffineModel& model, const ScalarField& field, const Eigen::VectorXd& x) {
  return {field(x), lie_derivatives(model, field, x)};
}

/// Builds a sample from a precomputed gradient.
inline FieldSample sample_from_gradient(const ControlAffineModel& model, double value, const Eigen::VectorXd& grad,
                                        const Eigen::VectorXd& x) {
  return {value, {grad.dot(model.drift(x)), model.input_matrix(x).transpose() * grad}};
}

struct QpPenalties {
  double p1 = 1e3;  // CLF slack
  double p2 = 1e3;  // CBF slack (KOZ in the inspection QP)
  double p3 = 1e3;  // KIZ slack
};

/// Lf h + Lg h (u + u_shift) + (alpha + gamma) h >= 0, with gamma slack `slack`.
inline IneqRow cbf_row(const FieldSample& h, double alpha, int n_slack, int slack,
                       const Eigen::VectorXd& u_shift = {}) {
  IneqRow r;
  r.a_u = h.lie.lg;
  r.a_slack = Eigen::VectorXd::Zero(n_slack);
  r.a_slack[slack] = h.value;
  r.rhs = -h.lie.lf - alpha * h.value;
  if (u_shift.size() > 0) r.rhs -= h.lie.lg.dot(u_shift);
  return r;
}

/// -Lf V - Lg V u - beta V + delta >= 0.
inline IneqRow clf_row(const FieldSample& v, double beta, int n_slack, int slack) {
  IneqRow r;
  r.a_u = -v.lie.lg;
  r.a_slack = Eigen::VectorXd::Zero(n_slack);
  r.a_slack[slack] = 1.0;
  r.rhs = v.lie.lf + beta * v.value;
  return r;
}

/// min 1/2|u|^2 + p1 delta + p2 gamma over the CBF and CLF rows.
inline ConvexSubproblem benchmark_qp(const FieldSample& h, const FieldSample& v, double alpha, double beta,
                                     const InputSet& input_set, const QpPenalties& pen = {}) {
  ConvexSubproblem p;
  p.m = input_set.dim();
  p.n_slack = 2;
  p.slack_penalties = Eigen::Vector2d(pen.p1, pen.p2);
  p.input_set = input_set;
  p.rows.push_back(cbf_row(h, alpha, 2, 1));
  p.rows.push_back(clf_row(v, beta, 2, 0));
  return p;
}

inline ConvexSubproblem assemble_stage1_qp(const ControlAffineModel& model, const ScalarField& h, const ClfSpec& clf,
                                           double alpha, double beta, const Eigen::VectorXd& x,
                                           const QpPenalties& pen = {}) {
  return benchmark_qp(sample_field(model, h, x), sample_field(model, clf.field, x), alpha, beta, model.input_set(),
                      pen);
}

/// Same structure with h replaced by the composite Stage-2 barrier.
inline ConvexSubproblem assemble_stage2_qp(const ControlAffineModel& model, const ScalarField& h_learned,
                                           const ClfSpec& clf, double alpha, double beta, const Eigen::VectorXd& x,
                                           const QpPenalties& pen = {}) {
  return assemble_stage1_qp(model, h_learned, clf, alpha, beta, x, pen);
}

/// Two CBF rows with slacks (gamma_1, gamma_2). The decision variable is the
/// filter's share u_QP of the total command u_QP + u_RL.
inline ConvexSubproblem inspection_stage1_qp(const FieldSample& koz, const FieldSample& kiz, double alpha1,
                                             double alpha2, const Eigen::VectorXd& u_rl, const InputSet& input_set,
                                             const QpPenalties& pen = {}) {
  ConvexSubproblem p;
  p.m = input_set.dim();
  p.n_slack = 2;
  p.slack_penalties = Eigen::Vector2d(pen.p2, pen.p3);
  p.input_set = input_set;
  p.rows.push_back(cbf_row(koz, alpha1, 2, 0, u_rl));
  p.rows.push_back(cbf_row(kiz, alpha2, 2, 1, u_rl));
  return p;
}

inline ConvexSubproblem inspection_stage2_qp(const FieldSample& h, double alpha, const Eigen::VectorXd& u_rl,
                                             const InputSet& input_set, double penalty = 1e3) {
  ConvexSubproblem p;
  p.m = input_set.dim();
  p.n_slack = 1;
  p.slack_penalties = Eigen::VectorXd::Constant(1, penalty);
  p.input_set = input_set;
  p.rows.push_back(cbf_row(h, alpha, 1, 0, u_rl));
  return p;
}

inline ConvexSubproblem assemble_inspection_stage1_qp(const ControlAffineModel& model, const ScalarField& h_koz2,
                                                      const ScalarField& h_kiz2, double alpha1, double alpha2,
                                                      const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl = {},
                                                      const QpPenalties& pen = {}) {
  const Eigen::VectorXd shift = u_rl.size() > 0 ? u_rl : Eigen::VectorXd::Zero(model.input_dim());
  return inspection_stage1_qp(sample_field(model, h_koz2, x), sample_field(model, h_kiz2, x), alpha1, alpha2, shift,
                              model.input_set(), pen);
}

inline ConvexSubproblem assemble_inspection_stage2_qp(const ControlAffineModel& model, const ScalarField& h,
                                                      double alpha, const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& u_rl = {}, double penalty = 1e3) {
  const Eigen::VectorXd shift = u_rl.size() > 0 ? u_rl : Eigen::VectorXd::Zero(model.input_dim());
  return inspection_stage2_qp(sample_field(model, h, x), alpha, shift, model.input_set(), penalty);
}

}  // namespace iccbf
