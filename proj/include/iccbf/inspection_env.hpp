#pragma once

// Inspection environment: alternating burn/coast arcs, the two-row
// (KOZ, KIZ) filter on b_2 in Stage 1, the combined residual barrier in
// Stage 2, and the observability bonus.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iccbf/barrier.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/env.hpp"
#include "iccbf/iccbf_chain.hpp"
#include "iccbf/mlp.hpp"
#include "iccbf/ppo.hpp"
#include "iccbf/qp.hpp"
#include "iccbf/qp_assembly.hpp"
#include "iccbf/scenarios.hpp"

namespace iccbf {

struct InspectionSettings {
  double alpha_min = 0.1, alpha_max = 10.0;
  double c_h1 = 1.0;  // KOZ penalty
  double c_h2 = 1.0;  // KIZ penalty
  double c_i = 0.1;   // metric gain
  bool literal_metric_sign = false;  // true: subtract c_i dC instead of adding it
  double coast_substep = 60.0;       // max integration step during coasts [s]
  int burn_substeps = 10;
  double violation_tol = 1e-9;
  double baseline_alpha = 1.0;
  QpPenalties penalties;
  SolverSettings solver;
  ObservationBounds stage1_bounds;
  ObservationBounds stage2_bounds;

  void validate() const {
    if (!(alpha_min > 0.0 && alpha_min < alpha_max)) throw std::invalid_argument("alpha bounds must be ordered and positive");
    if (c_h1 < 0.0 || c_h2 < 0.0 || c_i < 0.0) throw std::invalid_argument("reward gains must be nonnegative");
    if (!(coast_substep > 0.0) || burn_substeps < 1) throw std::invalid_argument("substeps must be positive");
  }
};

inline InspectionSettings inspection_settings(const InspectionParams& p = {}) {
  InspectionSettings s;
  const double r = p.r_kiz;
  const double v = 2.0;
  Eigen::VectorXd lo(6), hi(6);
  lo << -r, -r, -r, -v, -v, -v;
  hi << r, r, r, v, v, v;
  s.stage1_bounds = {lo, hi};
  // The combined zone field is constant, so its Lie derivatives, value and
  // the (zero) CLF carry no information and scale to 0.
  Eigen::VectorXd lo2(12), hi2(12);
  lo2 << lo, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0;
  hi2 << hi, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0;
  s.stage2_bounds = {lo2, hi2};
  return s;
}

struct InspectionProblem {
  InspectionParams params;
  ControlAffineModel model;
  BarrierChain koz;
  BarrierChain kiz;
  ScalarField combined;  // 1/2 (h_KOZ0 + h_KIZ0)
  ObservationMap stage2_obs;
  InspectionSettings settings;
  double hbar0 = 0.5;
  InitialGrid grid;

  int state_dim() const { return 6; }
};

inline InspectionProblem inspection_problem(const InspectionParams& p = {}, const ChainGains& gains = {},
                                            std::optional<InspectionSettings> settings = std::nullopt,
                                            int initial_count = 100) {
  p.validate();
  InspectionProblem ip{p,
                       inspection_model(p),
                       koz_chain(p, gains),
                       kiz_chain(p, gains),
                       make_field<6>("inspection_combined", InspectionCombined{p.r_koz, p.r_kiz}),
                       make_stage2_observation(InspectionDynamics{p}, InspectionCombined{p.r_koz, p.r_kiz},
                                               ZeroField<6>{}),
                       settings ? *settings : inspection_settings(p),
                       0.5,
                       {}};
  ip.settings.validate();
  ip.grid = split_D_E(inspection_initials(inspection_r0_sweep(p, initial_count), p), {ip.koz, ip.kiz});
  double koz = 0.0, kiz = 0.0;
  for (const auto& pt : ip.grid.points) {
    koz += ip.koz.h0()(pt.x);
    kiz += ip.kiz.h0()(pt.x);
  }
  const double n = static_cast<double>(std::max<std::size_t>(ip.grid.size(), 1));
  ip.hbar0 = 0.5 * (koz / n + kiz / n);
  return ip;
}

/// Decoded inspection action. Stage 1: [alpha_1, alpha_2, eta_b, eta_c,
/// u_hat (3), lambda]; Stage 2: [h_RL, alpha, eta_b, eta_c, u_hat (3), lambda].
struct InspectionAction {
  double alpha1 = 1.0, alpha2 = 1.0;
  double head = 0.0;  // raw barrier head (Stage 2)
  double eta_b = 0.0, eta_c = 0.0;
  Eigen::Vector3d u_hat = Eigen::Vector3d::Zero();
  double lambda = 0.0;
};

inline constexpr int kInspectionActionDim = 8;

inline InspectionAction decode_inspection_action(const InspectionSettings& s, int stage, const Eigen::VectorXd& raw) {
  if (raw.size() != kInspectionActionDim) throw std::invalid_argument("inspection action has wrong dimension");
  InspectionAction a;
  if (stage == 1) {
    a.alpha1 = squash(raw[0], s.alpha_min, s.alpha_max);
    a.alpha2 = squash(raw[1], s.alpha_min, s.alpha_max);
  } else {
    a.head = raw[0];
    a.alpha1 = a.alpha2 = squash(raw[1], s.alpha_min, s.alpha_max);
  }
  a.eta_b = std::tanh(raw[2]);
  a.eta_c = std::tanh(raw[3]);
  const Eigen::Vector3d d = raw.segment<3>(4);
  const double n = d.norm();
  a.u_hat = n > 1e-12 ? Eigen::Vector3d(d / n) : Eigen::Vector3d::Zero();
  a.lambda = 0.5 * (std::tanh(raw[7]) + 1.0);
  return a;
}

inline double burn_duration(const InspectionParams& p, double eta_b) {
  return p.burn_min() + 0.5 * (eta_b + 1.0) * (p.burn_max() - p.burn_min());
}

inline double coast_duration(const InspectionParams& p, double eta_c) {
  return p.coast_min + 0.5 * (eta_c + 1.0) * (p.coast_max - p.coast_min);
}

/// Command for one burn: the filter share from the QP plus u_RL, rescaled
/// onto the ball if round-off pushed it outside.
struct InspectionCommand {
  Eigen::Vector3d u_rl = Eigen::Vector3d::Zero();
  Eigen::Vector3d u = Eigen::Vector3d::Zero();  // total applied during the burn
  Solution qp;
  bool rescaled = false;
};

inline InspectionCommand inspection_command(const InspectionProblem& ip, int stage, const InspectionAction& a,
                                            const Eigen::VectorXd& x, const GaussianPolicy* snapshot) {
  InspectionCommand c;
  c.u_rl = a.lambda * ip.params.u_max * a.u_hat;
  if (stage == 1) {
    c.qp = solve(assemble_inspection_stage1_qp(ip.model, ip.koz.top(), ip.kiz.top(), a.alpha1, a.alpha2, x, c.u_rl,
                                               ip.settings.penalties),
                 ip.settings.solver);
  } else {
    if (!snapshot) throw std::logic_error("stage-2 inspection step needs a policy snapshot");
    const CompositeBarrier cb = composite_barrier(ip.combined, ip.stage2_obs, ip.settings.stage2_bounds, ip.hbar0,
                                                  *snapshot, 0, x, a.head);
    c.qp = solve(inspection_stage2_qp(sample_from_gradient(ip.model, cb.value, cb.gradient, x), a.alpha1, c.u_rl,
                                      ip.model.input_set(), ip.settings.penalties.p2),
                 ip.settings.solver);
  }
  c.u = c.qp.u + c.u_rl;
  const double n = c.u.norm();
  if (n > ip.params.u_max) {
    c.u *= ip.params.u_max / n;
    c.rescaled = true;
  }
  return c;
}

/// Samples of one burn + coast arc.
struct InspectionArc {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  double burn = 0.0, coast = 0.0;
};

/// Burn over `burn` seconds with `burn_substeps` RK4 steps, then coast with
/// steps of at most `coast_substep`.
inline InspectionArc propagate_arc(const InspectionProblem& ip, const Eigen::VectorXd& x, double t,
                                   const Eigen::Vector3d& u, double burn, double coast) {
  InspectionArc arc;
  arc.burn = burn;
  arc.coast = coast;
  arc.times.push_back(t);
  arc.states.push_back(x);
  auto extend = [&](const Eigen::VectorXd& uu, double dur, int n) {
    if (!(dur > 0.0)) return;
    const auto tr = propagate_zoh_trace(ip.model, arc.states.back(), uu, dur, PropagatorConfig{n});
    const double t0 = arc.times.back();
    for (std::size_t k = 1; k < tr.size(); ++k) {
      arc.times.push_back(t0 + dur * static_cast<double>(k) / n);
      arc.states.push_back(tr[k]);
    }
  };
  extend(u, burn, ip.settings.burn_substeps);
  extend(Eigen::Vector3d::Zero(), coast, std::max(1, static_cast<int>(std::ceil(coast / ip.settings.coast_substep - 1e-9))));
  return arc;
}

struct InspectionStepInfo {
  int stage = 1;
  Eigen::VectorXd x_next;
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_rl = Eigen::Vector3d::Zero();
  double burn = 0.0, coast = 0.0;
  double h_koz = 0.0, h_kiz = 0.0;         // at x_next
  double min_h_koz = 0.0, min_h_kiz = 0.0; // over the arc samples
  double score = 0.0;                      // metric increment over the arc
  double fuel = 0.0;                       // |u| t_b
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
  double solve_seconds = 0.0;
  bool rescaled = false;
  bool violation = false;
};

inline double inspection_reward(const InspectionSettings& s, double h_koz, double h_kiz, double score) {
  const double bonus = s.c_i * score;
  return -s.c_h1 * std::max(0.0, -h_koz) - s.c_h2 * std::max(0.0, -h_kiz) + (s.literal_metric_sign ? -bonus : bonus);
}

/// One decision step from (x, t); the arc is clipped at the mission end.
inline InspectionStepInfo inspection_advance(const InspectionProblem& ip, int stage, const InspectionAction& a,
                                             const Eigen::VectorXd& x, double t, const GaussianPolicy* snapshot) {
  const InspectionCommand c = inspection_command(ip, stage, a, x, snapshot);
  const double left = ip.params.mission_time - t;
  const double burn = std::min(burn_duration(ip.params, a.eta_b), left);
  const double coast = std::min(coast_duration(ip.params, a.eta_c), left - burn);
  const InspectionArc arc = propagate_arc(ip, x, t, c.u, burn, coast);
  InspectionStepInfo info;
  info.stage = stage;
  info.x_next = arc.states.back();
  info.u = c.u;
  info.u_rl = c.u_rl;
  info.burn = burn;
  info.coast = coast;
  info.h_koz = ip.koz.h0()(info.x_next);
  info.h_kiz = ip.kiz.h0()(info.x_next);
  info.min_h_koz = info.h_koz;
  info.min_h_kiz = info.h_kiz;
  for (const auto& s : arc.states) {
    info.min_h_koz = std::min(info.min_h_koz, ip.koz.h0()(s));
    info.min_h_kiz = std::min(info.min_h_kiz, ip.kiz.h0()(s));
  }
  info.score = inspection_score_increment(ip.params, arc.times, arc.states);
  info.fuel = c.u.norm() * burn;
  info.status = c.qp.status;
  info.iterations = c.qp.iterations;
  info.solve_seconds = c.qp.solve_seconds;
  info.rescaled = c.rescaled;
  info.violation = std::min(info.min_h_koz, info.min_h_kiz) < -ip.settings.violation_tol;
  return info;
}

/// Fixed timing (eta = 0), no enhancement thrust, alpha_1 = alpha_2 = baseline.
inline InspectionAction inspection_baseline_action(const InspectionSettings& s) {
  InspectionAction a;
  a.alpha1 = a.alpha2 = s.baseline_alpha;
  return a;
}

inline Eigen::VectorXd inspection_stage1_observation(const InspectionProblem& ip, const Eigen::VectorXd& x) {
  return scale_observation(x, ip.settings.stage1_bounds);
}

inline Eigen::VectorXd inspection_stage2_observation(const InspectionProblem& ip, const Eigen::VectorXd& x) {
  return scale_observation(ip.stage2_obs.value(x), ip.settings.stage2_bounds);
}

/// Stage 1 inside both chains' C*, Stage 2 in S \ C*, unsafe outside S.
inline Stage inspection_dispatch(const InspectionProblem& ip, const Eigen::VectorXd& x) {
  const SetTag t = classify({ip.koz, ip.kiz}, x);
  if (t == SetTag::kD) return Stage::kOne;
  return t == SetTag::kE ? Stage::kTwo : Stage::kUnsafe;
}

class InspectionEnv : public Environment {
 public:
  InspectionEnv(std::shared_ptr<const InspectionProblem> ip, int stage, std::vector<Eigen::VectorXd> starts)
      : ip_(std::move(ip)), stage_(stage), starts_(std::move(starts)) {
    if (stage_ != 1 && stage_ != 2) throw std::invalid_argument("stage must be 1 or 2");
    if (starts_.empty()) throw std::invalid_argument("environment needs at least one start state");
  }

  int observation_dim() const override { return stage_ == 1 ? ip_->state_dim() : ip_->stage2_obs.dim; }
  int action_dim() const override { return kInspectionActionDim; }

  Eigen::VectorXd reset(std::mt19937_64& rng) override {
    std::uniform_int_distribution<std::size_t> pick(0, starts_.size() - 1);
    return reset_to(starts_[pick(rng)]);
  }

  Eigen::VectorXd reset_to(const Eigen::VectorXd& x0) {
    ip_->model.check_state(x0);
    x_ = x0;
    t_ = 0.0;
    return observe();
  }

  void set_policy_snapshot(std::shared_ptr<const GaussianPolicy> snapshot) override { snapshot_ = std::move(snapshot); }

  StepOutput step(const Eigen::VectorXd& raw) override {
    const InspectionAction a = decode_inspection_action(ip_->settings, stage_, raw);
    info_ = inspection_advance(*ip_, stage_, a, x_, t_, snapshot_.get());
    x_ = info_.x_next;
    t_ += info_.burn + info_.coast;
    StepOutput out;
    out.reward = inspection_reward(ip_->settings, info_.h_koz, info_.h_kiz, info_.score);
    out.done = t_ >= ip_->params.mission_time - 1e-9;
    out.observation = observe();
    return out;
  }

  const InspectionStepInfo& last_info() const { return info_; }
  const Eigen::VectorXd& state() const { return x_; }
  double time() const { return t_; }

 private:
  Eigen::VectorXd observe() const {
    return stage_ == 1 ? inspection_stage1_observation(*ip_, x_) : inspection_stage2_observation(*ip_, x_);
  }

  std::shared_ptr<const InspectionProblem> ip_;
  int stage_;
  std::vector<Eigen::VectorXd> starts_;
  std::shared_ptr<const GaussianPolicy> snapshot_;
  Eigen::VectorXd x_;
  double t_ = 0.0;
  InspectionStepInfo info_;
};

}  // namespace iccbf
