#pragma once

// Benchmark environments (cruise, docking): action decoding, the safety
// filter, zero-order-hold propagation, rewards and observation scaling for
// Stage 1 (learned margins on b_2) and Stage 2 (learned residual barrier).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iccbf/autodiff.hpp"
#include "iccbf/barrier.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/iccbf_chain.hpp"
#include "iccbf/mlp.hpp"
#include "iccbf/ppo.hpp"
#include "iccbf/qp.hpp"
#include "iccbf/qp_assembly.hpp"
#include "iccbf/scenarios.hpp"
#include "iccbf/small_vec.hpp"

namespace iccbf {

struct ObservationBounds {
  Eigen::VectorXd lo, hi;
  Eigen::Index size() const { return lo.size(); }
};

/// 2(S - lo)/(hi - lo) - 1 clamped to [-1, 1]; components with hi == lo map to 0.
inline Eigen::VectorXd scale_observation(const Eigen::VectorXd& s, const ObservationBounds& b) {
  if (s.size() != b.lo.size() || s.size() != b.hi.size()) throw std::invalid_argument("observation bounds mismatch");
  Eigen::VectorXd out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double w = b.hi[i] - b.lo[i];
    out[i] = w > 0.0 ? std::clamp(2.0 * (s[i] - b.lo[i]) / w - 1.0, -1.0, 1.0) : 0.0;
  }
  return out;
}

/// Derivative of `scale_observation` per component (0 where clamped or degenerate).
inline Eigen::VectorXd scale_observation_slope(const Eigen::VectorXd& s, const ObservationBounds& b) {
  Eigen::VectorXd out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double w = b.hi[i] - b.lo[i];
    const double z = w > 0.0 ? 2.0 * (s[i] - b.lo[i]) / w - 1.0 : 0.0;
    out[i] = w > 0.0 && z > -1.0 && z < 1.0 ? 2.0 / w : 0.0;
  }
  return out;
}

/// Unscaled Stage-2 observation S(x) = [x, Lg h0, Lf h0, h0, V].
template <ControlAffineDynamics Dyn, class H0, class Clf>
struct Stage2ObservationMap {
  static constexpr std::size_t N = Dyn::kStateDim;
  static constexpr std::size_t M = Dyn::kInputDim;
  static constexpr std::size_t K = N + M + 3;
  Dyn dyn;
  H0 h0;
  Clf clf;

  template <class S>
  Vec<S, K> operator()(const Vec<S, N>& x) const {
    std::array<S, N> grad;
    S h{};
    std::array<Dual<S>, N> xd;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) xd[j] = Dual<S>(x[j], S(i == j ? 1.0 : 0.0));
      const Dual<S> r = h0(xd);
      grad[i] = r.d;
      if (i == 0) h = r.v;
    }
    const S lf = dot(grad, dyn.drift(x));
    const auto lg = left_multiply(grad, dyn.input_matrix(x));
    Vec<S, K> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = x[i];
    for (std::size_t j = 0; j < M; ++j) out[N + j] = lg[j];
    out[N + M] = lf;
    out[N + M + 1] = h;
    out[N + M + 2] = clf(x);
    return out;
  }
};

/// Type-erased observation map with its Jacobian.
struct ObservationMap {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

template <ControlAffineDynamics Dyn, class H0, class Clf>
ObservationMap make_stage2_observation(const Dyn& dyn, const H0& h0, const Clf& clf) {
  using Map = Stage2ObservationMap<Dyn, H0, Clf>;
  auto map = std::make_shared<const Map>(Map{dyn, h0, clf});
  ObservationMap om;
  om.dim = static_cast<int>(Map::K);
  om.value = [map](const Eigen::VectorXd& x) { return to_eigen((*map)(from_eigen<Map::N>(x))); };
  om.jacobian = [map](const Eigen::VectorXd& x) {
    return to_eigen(jacobian<Map::K, Map::N>([&](const auto& xd) { return (*map)(xd); }, from_eigen<Map::N>(x)));
  };
  return om;
}

/// Barrier of the residual stage: h = h0 + hbar0 tanh(a0), where a0 is the
/// policy's barrier head (raw). The gradient differentiates the head mean
/// through the observation scaling and the observation map.
struct CompositeBarrier {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double head = 0.0;  // tanh(a0)
};

inline CompositeBarrier composite_barrier(const ScalarField& h0, const ObservationMap& obs,
                                          const ObservationBounds& bounds, double hbar0,
                                          const GaussianPolicy& policy, int head, const Eigen::VectorXd& x,
                                          std::optional<double> raw_head = std::nullopt) {
  const Eigen::VectorXd s = obs.value(x);
  const Eigen::VectorXd ss = scale_observation(s, bounds);
  const double a0 = raw_head ? *raw_head : policy.mean(ss)[head];
  const double t = std::tanh(a0);
  const Eigen::VectorXd dmean = policy.mean_net().input_gradient(ss, head);
  const Eigen::VectorXd ds = scale_observation_slope(s, bounds).cwiseProduct(dmean);
  CompositeBarrier cb;
  cb.head = t;
  cb.value = h0(x) + hbar0 * t;
  cb.gradient = h0.gradient(x) + hbar0 * (1.0 - t * t) * (obs.jacobian(x).transpose() * ds);
  return cb;
}

/// The deterministic composite (a0 = head mean) as a field.
inline ScalarField composite_field(ScalarField h0, ObservationMap obs, ObservationBounds bounds, double hbar0,
                                   std::shared_ptr<const GaussianPolicy> policy, int head = 0) {
  auto value = [=](const Eigen::VectorXd& x) {
    return composite_barrier(h0, obs, bounds, hbar0, *policy, head, x).value;
  };
  auto gradient = [=](const Eigen::VectorXd& x) {
    return composite_barrier(h0, obs, bounds, hbar0, *policy, head, x).gradient;
  };
  return ScalarField(h0.name() + "_composite", value, gradient);
}

struct BenchmarkSettings {
  double dt = 0.1;
  double t_final = 20.0;
  double alpha_min = 0.1, alpha_max = 10.0;
  double beta_min = 0.1, beta_max = 10.0;
  double c_h = 100.0;
  double c_u = 1.0;
  double violation_tol = 1e-9;     // h0 below -tol counts as a violation
  bool early_stop = false;          // stop once the CLF falls below `docked_threshold`
  double docked_threshold = 5e-5;
  double baseline_alpha = 1.0;
  double baseline_beta = 1.0;
  QpPenalties penalties;
  SolverSettings solver;
  PropagatorConfig propagator;
  ObservationBounds stage1_bounds;
  ObservationBounds stage2_bounds;

  int steps() const { return static_cast<int>(std::lround(t_final / dt)); }

  void validate() const {
    if (!(dt > 0.0) || !(t_final > 0.0)) throw std::invalid_argument("dt and t_final must be positive");
    if (std::abs(steps() * dt - t_final) > 1e-9 * t_final) throw std::invalid_argument("t_final must be a multiple of dt");
    if (!(alpha_min < alpha_max) || !(beta_min < beta_max)) throw std::invalid_argument("action bounds must be ordered");
    if (!(alpha_min > 0.0) || !(beta_min > 0.0)) throw std::invalid_argument("action bounds must be positive");
    if (c_h < 0.0 || c_u < 0.0) throw std::invalid_argument("reward gains must be nonnegative");
  }
};

/// Everything one benchmark scenario needs at run time.
struct BenchmarkProblem {
  std::string name;
  ControlAffineModel model;
  BarrierChain chain;
  ClfSpec clf;
  ObservationMap stage2_obs;
  BenchmarkSettings settings;
  double hbar0 = 1.0;
  InitialGrid grid;  // tagged initial states

  const ScalarField& h0() const { return chain.h0(); }
  int state_dim() const { return model.state_dim(); }
  int input_dim() const { return model.input_dim(); }
};

inline BenchmarkSettings cruise_settings(const CruiseParams& p = {}) {
  BenchmarkSettings s;
  s.dt = 0.1;
  s.t_final = 20.0;
  s.stage1_bounds = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(150.0, 30.0)};
  const double lg = -p.headway * p.g0;
  Eigen::VectorXd lo(6), hi(6);
  lo << 0.0, 0.0, lg, -20.0, -60.0, 0.0;
  hi << 150.0, 30.0, lg, 20.0, 150.0, 600.0;
  s.stage2_bounds = {lo, hi};
  return s;
}

inline BenchmarkSettings docking_settings(const DockingParams& p = {}) {
  BenchmarkSettings s;
  s.dt = 0.5;
  s.t_final = 50.0;
  s.early_stop = true;
  s.docked_threshold = p.docked_threshold;
  Eigen::VectorXd lo(5), hi(5);
  lo << 0.0, -100.0, -5.0, -5.0, 0.0;
  hi << 550.0, 100.0, 5.0, 5.0, 0.6;
  s.stage1_bounds = {lo, hi};
  Eigen::VectorXd lo2(10), hi2(10);
  lo2 << lo, 0.0, 0.0, -0.05, -0.2, 0.0;
  hi2 << hi, 0.0, 0.0, 0.05, 0.02, 3000.0;
  s.stage2_bounds = {lo2, hi2};
  return s;
}

/// Mean of h0 over the E-tagged starts, or over all safe starts if E is empty.
inline double mean_h0(const ScalarField& h0, const InitialGrid& grid) {
  double sum = 0.0;
  int n = 0;
  for (const auto& p : grid.points) {
    if (p.tag == SetTag::kE) {
      sum += h0(p.x);
      ++n;
    }
  }
  if (n == 0) {
    for (const auto& p : grid.points) {
      if (p.tag != SetTag::kUnsafe) {
        sum += h0(p.x);
        ++n;
      }
    }
  }
  return n > 0 ? sum / n : 1.0;
}

inline BenchmarkProblem cruise_problem(const CruiseParams& p = {}, const ChainGains& gains = {},
                                       std::optional<BenchmarkSettings> settings = std::nullopt) {
  BenchmarkProblem pb{"cruise",
                      cruise_model(p),
                      cruise_chain(p, gains),
                      cruise_clf(p),
                      make_stage2_observation(CruiseDynamics{p}, CruiseSafety{p.headway}, CruiseClf{p.v_max}),
                      settings ? *settings : cruise_settings(p),
                      1.0,
                      {}};
  pb.settings.validate();
  pb.grid = split_D_E(cruise_grid(), pb.chain);
  pb.hbar0 = mean_h0(pb.h0(), pb.grid);
  return pb;
}

inline BenchmarkProblem docking_problem(const DockingParams& p = {}, const ChainGains& gains = docking_gains(),
                                        std::optional<BenchmarkSettings> settings = std::nullopt,
                                        LateralOffset offset = LateralOffset::kFromPort) {
  BenchmarkProblem pb{"docking",
                      docking_model(p),
                      docking_chain(p, gains),
                      docking_clf(p),
                      make_stage2_observation(DockingDynamics{p}, DockingLineOfSight{p.port_radius, p.cone_half_angle},
                                              DockingClf{p.port_radius, p.clf_time_constant}),
                      settings ? *settings : docking_settings(p),
                      1.0,
                      {}};
  pb.settings.validate();
  pb.grid = split_D_E(docking_initials(p, offset), pb.chain);
  pb.hbar0 = mean_h0(pb.h0(), pb.grid);
  return pb;
}

inline Eigen::VectorXd stage1_observation(const BenchmarkProblem& pb, const Eigen::VectorXd& x) {
  return scale_observation(x, pb.settings.stage1_bounds);
}

inline Eigen::VectorXd stage2_observation(const BenchmarkProblem& pb, const Eigen::VectorXd& x) {
  return scale_observation(pb.stage2_obs.value(x), pb.settings.stage2_bounds);
}

/// Output of one safety-filter evaluation.
struct FilterResult {
  Eigen::VectorXd u;
  Solution qp;
  double barrier = 0.0;         // value of the field in the CBF row
  bool slack_tightens = false;  // barrier < 0: the CBF slack makes the row stricter
};

/// Solves the CBF/CLF program for a barrier sample at x and projects the
/// result onto U (guards against round-off at the boundary).
inline FilterResult filter_control(const BenchmarkProblem& pb, const FieldSample& h, const Eigen::VectorXd& x,
                                   double alpha, double beta) {
  const FieldSample v = sample_field(pb.model, pb.clf.field, x);
  FilterResult r;
  r.qp = solve(benchmark_qp(h, v, alpha, beta, pb.model.input_set(), pb.settings.penalties), pb.settings.solver);
  r.u = pb.model.input_set().project(r.qp.u);
  r.barrier = h.value;
  r.slack_tightens = h.value < 0.0;
  return r;
}

inline FilterResult stage1_control(const BenchmarkProblem& pb, const Eigen::VectorXd& x, double alpha, double beta) {
  return filter_control(pb, sample_field(pb.model, pb.chain.top(), x), x, alpha, beta);
}

/// Fixed-gain controller on b_N.
inline FilterResult baseline_iccbf_control(const BenchmarkProblem& pb, const Eigen::VectorXd& x) {
  return stage1_control(pb, x, pb.settings.baseline_alpha, pb.settings.baseline_beta);
}

inline FilterResult stage2_control(const BenchmarkProblem& pb, const GaussianPolicy& snapshot, const Eigen::VectorXd& x,
                                   double raw_head, double alpha, double beta) {
  const CompositeBarrier cb =
      composite_barrier(pb.h0(), pb.stage2_obs, pb.settings.stage2_bounds, pb.hbar0, snapshot, 0, x, raw_head);
  return filter_control(pb, sample_from_gradient(pb.model, cb.value, cb.gradient, x), x, alpha, beta);
}

enum class Stage { kOne = 1, kTwo = 2, kUnsafe = 0 };

/// Stage 1 inside C*, Stage 2 in S \ C*, unsafe outside S.
inline Stage dispatch(const BarrierChain& chain, const Eigen::VectorXd& x) {
  const ChainMembership m = chain.membership(x);
  if (m.in_Cstar) return Stage::kOne;
  return m.in_S ? Stage::kTwo : Stage::kUnsafe;
}

inline bool docking_early_stop(const BenchmarkProblem& pb, const Eigen::VectorXd& x) {
  return pb.clf.field(x) < pb.settings.docked_threshold;
}

/// -c_h max(0, -h0(x_next)) - c_u |u|.
inline double benchmark_reward(const BenchmarkSettings& s, double h0_next, const Eigen::VectorXd& u) {
  return -s.c_h * std::max(0.0, -h0_next) - s.c_u * u.norm();
}

struct StepInfo {
  Stage stage = Stage::kOne;
  Eigen::VectorXd x_next;
  Eigen::VectorXd u;
  double h0 = 0.0;         // h0(x_next)
  double barrier = 0.0;    // field used in the CBF row at x
  double alpha = 0.0, beta = 0.0, head = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
  double solve_seconds = 0.0;
  bool violation = false;  // h0(x_next) < -violation_tol
  bool slack_tightens = false;
  bool docked = false;
};

/// Applies u over one hold and fills the bookkeeping shared by all strategies.
inline StepInfo advance(const BenchmarkProblem& pb, const Eigen::VectorXd& x, const FilterResult& fr, Stage stage) {
  StepInfo info;
  info.stage = stage;
  info.u = fr.u;
  info.barrier = fr.barrier;
  info.status = fr.qp.status;
  info.iterations = fr.qp.iterations;
  info.solve_seconds = fr.qp.solve_seconds;
  info.slack_tightens = fr.slack_tightens;
  info.x_next = propagate_zoh(pb.model, x, fr.u, pb.settings.dt, pb.settings.propagator);
  info.h0 = pb.h0()(info.x_next);
  info.violation = info.h0 < -pb.settings.violation_tol;
  info.docked = pb.settings.early_stop && docking_early_stop(pb, info.x_next);
  return info;
}

/// Gym-style environment for one stage. Stage 1 actions: raw (alpha, beta);
/// Stage 2 actions: raw (barrier head, alpha, beta).
class BenchmarkEnv : public Environment {
 public:
  BenchmarkEnv(std::shared_ptr<const BenchmarkProblem> pb, int stage, std::vector<Eigen::VectorXd> starts)
      : pb_(std::move(pb)), stage_(stage), starts_(std::move(starts)) {
    if (stage_ != 1 && stage_ != 2) throw std::invalid_argument("stage must be 1 or 2");
    if (starts_.empty()) throw std::invalid_argument("environment needs at least one start state");
    const auto& s = pb_->settings;
    margins_ = BoundedActionMap({{s.alpha_min, s.alpha_max}, {s.beta_min, s.beta_max}});
  }

  int observation_dim() const override { return stage_ == 1 ? pb_->state_dim() : pb_->stage2_obs.dim; }
  int action_dim() const override { return stage_ == 1 ? 2 : 3; }

  Eigen::VectorXd reset(std::mt19937_64& rng) override {
    std::uniform_int_distribution<std::size_t> pick(0, starts_.size() - 1);
    return reset_to(starts_[pick(rng)]);
  }

  Eigen::VectorXd reset_to(const Eigen::VectorXd& x0) {
    pb_->model.check_state(x0);
    x_ = x0;
    step_ = 0;
    return observe();
  }

  void set_policy_snapshot(std::shared_ptr<const GaussianPolicy> snapshot) override { snapshot_ = std::move(snapshot); }

  StepOutput step(const Eigen::VectorXd& raw) override {
    if (raw.size() != action_dim()) throw std::invalid_argument("action has wrong dimension");
    FilterResult fr;
    double head = 0.0;
    Eigen::VectorXd ab;
    if (stage_ == 1) {
      ab = margins_.decode(raw);
      fr = stage1_control(*pb_, x_, ab[0], ab[1]);
    } else {
      if (!snapshot_) throw std::logic_error("stage-2 environment needs a policy snapshot");
      ab = margins_.decode(raw.tail(2));
      fr = stage2_control(*pb_, *snapshot_, x_, raw[0], ab[0], ab[1]);
      head = std::tanh(raw[0]);
    }
    info_ = advance(*pb_, x_, fr, stage_ == 1 ? Stage::kOne : Stage::kTwo);
    info_.alpha = ab[0];
    info_.beta = ab[1];
    info_.head = head;
    x_ = info_.x_next;
    ++step_;
    StepOutput out;
    out.reward = benchmark_reward(pb_->settings, info_.h0, info_.u);
    out.done = step_ >= pb_->settings.steps() || info_.docked;
    out.observation = observe();
    return out;
  }

  const StepInfo& last_info() const { return info_; }
  const Eigen::VectorXd& state() const { return x_; }
  double time() const { return step_ * pb_->settings.dt; }
  const BenchmarkProblem& problem() const { return *pb_; }

 private:
  Eigen::VectorXd observe() const {
    return stage_ == 1 ? stage1_observation(*pb_, x_) : stage2_observation(*pb_, x_);
  }

  std::shared_ptr<const BenchmarkProblem> pb_;
  int stage_;
  std::vector<Eigen::VectorXd> starts_;
  BoundedActionMap margins_;
  std::shared_ptr<const GaussianPolicy> snapshot_;
  Eigen::VectorXd x_;
  int step_ = 0;
  StepInfo info_;
};

/// PPO settings for each scenario and stage.
inline PpoConfig ppo_preset(const std::string& scenario, int stage) {
  PpoConfig c;
  if (scenario == "cruise" || scenario == "docking") {
    c.rollout_steps = scenario == "cruise" ? 1280 : 2560;
    if (stage == 1) {
      c.learning_rate = 1e-3;
      c.schedule = LrSchedule::kConstant;
      c.batch_size = 64;
      c.gamma = 0.95;
      c.n_envs = 8;
    } else {
      c.learning_rate = 1e-4;
      c.schedule = LrSchedule::kLinearDecay;
      c.batch_size = 256;
      c.gamma = 0.999;
      c.n_envs = 1;
    }
  } else if (scenario == "inspection") {
    c.rollout_steps = 1280;
    c.learning_rate = 1e-4;
    c.gamma = 0.95;
    c.n_envs = stage == 1 ? 8 : 1;
    c.schedule = stage == 1 ? LrSchedule::kConstant : LrSchedule::kLinearDecay;
    c.batch_size = stage == 1 ? 64 : 256;
    c.init_std = stage == 1 ? 0.2 : 0.21;
  } else {
    throw std::invalid_argument("unknown scenario '" + scenario + "'");
  }
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  c.epochs = 10;
  c.gae_lambda = 0.99;
  c.clip_range = 0.2;
  c.entropy_coef = 0.01;
  return c;
}

}  // namespace iccbf
