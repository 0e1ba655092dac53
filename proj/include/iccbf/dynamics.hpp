#pragma once

// Control-affine models x' = f(x) + g(x) u for the three scenarios and a
// fixed-step RK4 zero-order-hold propagator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iccbf/params.hpp"
#include "iccbf/small_vec.hpp"

namespace iccbf {

/// The state left the region where the dynamics are defined.
struct SingularStateError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Numerical integration produced a non-finite state.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Admissible inputs: a Euclidean ball of radius u_max or a per-axis box.
class InputSet {
 public:
  enum class Kind { kNormBall, kBox };

  static InputSet norm_ball(int dim, double radius) {
    if (!(radius > 0.0) || dim < 1) throw std::invalid_argument("norm ball needs radius > 0");
    InputSet s;
    s.kind_ = Kind::kNormBall;
    s.bounds_ = Eigen::VectorXd::Constant(dim, radius);
    return s;
  }

  static InputSet box(Eigen::VectorXd bounds) {
    if (bounds.size() < 1 || !(bounds.array() > 0.0).all()) {
      throw std::invalid_argument("box bounds must be strictly positive");
    }
    InputSet s;
    s.kind_ = Kind::kBox;
    s.bounds_ = std::move(bounds);
    return s;
  }

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(bounds_.size()); }
  /// Ball radius (norm_ball) or the largest per-axis bound (box).
  double radius() const { return bounds_.maxCoeff(); }
  const Eigen::VectorXd& bounds() const { return bounds_; }

  bool contains(const Eigen::VectorXd& u, double rel_tol = 1e-9) const {
    if (u.size() != bounds_.size() || !u.allFinite()) return false;
    if (kind_ == Kind::kNormBall) return u.norm() <= bounds_[0] * (1.0 + rel_tol);
    return (u.array().abs() <= bounds_.array() * (1.0 + rel_tol)).all();
  }

  Eigen::VectorXd project(const Eigen::VectorXd& u) const {
    if (kind_ == Kind::kNormBall) {
      const double n = u.norm();
      return n > bounds_[0] ? Eigen::VectorXd(u * (bounds_[0] / n)) : u;
    }
    return u.cwiseMax(-bounds_).cwiseMin(bounds_);
  }

  /// sup over u in U of w·u.
  double support(const Eigen::VectorXd& w) const {
    if (kind_ == Kind::kNormBall) return bounds_[0] * w.norm();
    return bounds_.dot(w.cwiseAbs());
  }

  template <class S, std::size_t M>
  S support(const Vec<S, M>& w) const {
    if (kind_ == Kind::kNormBall) return bounds_[0] * safe_norm(w);
    S acc(0.0);
    for (std::size_t i = 0; i < M; ++i) acc += bounds_[static_cast<Eigen::Index>(i)] * abs_of(w[i]);
    return acc;
  }

 private:
  template <class S>
  static S abs_of(const S& s) {
    using std::abs;
    return abs(s);
  }

  Kind kind_ = Kind::kNormBall;
  Eigen::VectorXd bounds_;
};

struct CruiseDynamics {
  static constexpr std::size_t kStateDim = 2;
  static constexpr std::size_t kInputDim = 1;
  CruiseParams params;

  static std::vector<std::string> labels() { return {"d", "v"}; }
  InputSet input_set() const { return InputSet::box(Eigen::VectorXd::Constant(1, params.u_max)); }

  template <class S>
  Vec<S, 2> drift(const Vec<S, 2>& x) const {
    const S& v = x[1];
    const S resistance = params.f0 + params.f1 * v + params.f2 * v * v;
    return {params.lead_speed - v, -resistance / params.mass};
  }

  template <class S>
  Mat<S, 2, 1> input_matrix(const Vec<S, 2>& /*x*/) const {
    return {{{S(0.0)}, {S(params.g0)}}};
  }
};

namespace detail {
template <class S>
S chaser_orbit_radius(const OrbitParams& orbit, const S& px, const S& py, const S& pz) {
  using std::sqrt;
  const S rx = orbit.radius + px;
  const S rc2 = rx * rx + py * py + pz * pz;
  if (!(value_of(rc2) > 0.0)) throw SingularStateError("chaser at the Earth's centre (r_c = 0)");
  return sqrt(rc2);
}
}  // namespace detail

/// State (p_x, p_y, v_x, v_y, psi). The gravity terms use the chaser's
/// orbital radius |(r + p_x, p_y)|.
struct DockingDynamics {
  static constexpr std::size_t kStateDim = 5;
  static constexpr std::size_t kInputDim = 2;
  DockingParams params;

  static std::vector<std::string> labels() { return {"px", "py", "vx", "vy", "psi"}; }
  InputSet input_set() const { return InputSet::norm_ball(2, params.u_max); }

  template <class S>
  Vec<S, 5> drift(const Vec<S, 5>& x) const {
    const OrbitParams& o = params.orbit;
    const double n = o.mean_motion();
    const S rc = detail::chaser_orbit_radius(o, x[0], x[1], S(0.0));
    const S rc3 = rc * rc * rc;
    const S ax = n * n * x[0] + 2.0 * n * x[3] + o.mu / (o.radius * o.radius) -
                 o.mu * (o.radius + x[0]) / rc3;
    const S ay = n * n * x[1] - 2.0 * n * x[2] - o.mu * x[1] / rc3;
    return {x[2], x[3], ax, ay, S(params.port_rate)};
  }

  template <class S>
  Mat<S, 5, 2> input_matrix(const Vec<S, 5>& /*x*/) const {
    const double k = 1.0 / params.chaser_mass;
    Mat<S, 5, 2> g{};
    for (auto& row : g) row.fill(S(0.0));
    g[2][0] = S(k);
    g[3][1] = S(k);
    return g;
  }
};

/// State (p_x, p_y, p_z, v_x, v_y, v_z) in LVLH.
struct InspectionDynamics {
  static constexpr std::size_t kStateDim = 6;
  static constexpr std::size_t kInputDim = 3;
  InspectionParams params;

  static std::vector<std::string> labels() { return {"px", "py", "pz", "vx", "vy", "vz"}; }
  InputSet input_set() const { return InputSet::norm_ball(3, params.u_max); }

  template <class S>
  Vec<S, 6> drift(const Vec<S, 6>& x) const {
    const OrbitParams& o = params.orbit;
    const double n = o.mean_motion();
    const S rc = detail::chaser_orbit_radius(o, x[0], x[1], x[2]);
    const S rc3 = rc * rc * rc;
    const S ax = n * n * x[0] + 2.0 * n * x[4] + o.mu / (o.radius * o.radius) -
                 o.mu * (o.radius + x[0]) / rc3;
    const S ay = n * n * x[1] - 2.0 * n * x[3] - o.mu * x[1] / rc3;
    const S az = -o.mu * x[2] / rc3;
    return {x[3], x[4], x[5], ax, ay, az};
  }

  template <class S>
  Mat<S, 6, 3> input_matrix(const Vec<S, 6>& /*x*/) const {
    const double k = 1.0 / params.chaser_mass;
    Mat<S, 6, 3> g{};
    for (auto& row : g) row.fill(S(0.0));
    g[3][0] = S(k);
    g[4][1] = S(k);
    g[5][2] = S(k);
    return g;
  }
};

template <class D>
concept ControlAffineDynamics = requires(const D& d, const Vec<double, D::kStateDim>& x) {
  { d.drift(x) } -> std::same_as<Vec<double, D::kStateDim>>;
  { d.input_matrix(x) } -> std::same_as<Mat<double, D::kStateDim, D::kInputDim>>;
  { d.input_set() } -> std::same_as<InputSet>;
};

/// Type-erased, immutable view of a scenario's dynamics at double precision.
class ControlAffineModel {
 public:
  template <ControlAffineDynamics Dyn>
  ControlAffineModel(Dyn dyn, std::string name)
      : name_(std::move(name)), input_set_(dyn.input_set()), labels_(Dyn::labels()) {
    impl_ = std::make_shared<const Impl<Dyn>>(std::move(dyn));
  }

  int state_dim() const { return impl_->state_dim(); }
  int input_dim() const { return impl_->input_dim(); }
  const std::string& name() const { return name_; }
  const InputSet& input_set() const { return input_set_; }
  const std::vector<std::string>& labels() const { return labels_; }

  Eigen::VectorXd drift(const Eigen::VectorXd& x) const {
    check_state(x);
    return impl_->drift(x);
  }
  Eigen::MatrixXd input_matrix(const Eigen::VectorXd& x) const {
    check_state(x);
    return impl_->input_matrix(x);
  }
  Eigen::VectorXd derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    check_state(x);
    return impl_->drift(x) + impl_->input_matrix(x) * u;
  }

  void check_state(const Eigen::VectorXd& x) const {
    if (x.size() != state_dim()) throw std::invalid_argument("state has wrong dimension for " + name_);
    if (!x.allFinite()) throw std::invalid_argument("state has non-finite entries");
  }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual int state_dim() const = 0;
    virtual int input_dim() const = 0;
    virtual Eigen::VectorXd drift(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd input_matrix(const Eigen::VectorXd& x) const = 0;
  };

  template <class Dyn>
  struct Impl final : Concept {
    explicit Impl(Dyn d) : dyn(std::move(d)) {}
    int state_dim() const override { return static_cast<int>(Dyn::kStateDim); }
    int input_dim() const override { return static_cast<int>(Dyn::kInputDim); }
    Eigen::VectorXd drift(const Eigen::VectorXd& x) const override {
      return to_eigen(dyn.drift(from_eigen<Dyn::kStateDim>(x)));
    }
    Eigen::MatrixXd input_matrix(const Eigen::VectorXd& x) const override {
      return to_eigen(dyn.input_matrix(from_eigen<Dyn::kStateDim>(x)));
    }
    Dyn dyn;
  };

  std::shared_ptr<const Concept> impl_;
  std::string name_;
  InputSet input_set_;
  std::vector<std::string> labels_;
};

inline ControlAffineModel cruise_model(const CruiseParams& p = {}) {
  p.validate();
  return ControlAffineModel(CruiseDynamics{p}, "cruise");
}
inline ControlAffineModel docking_model(const DockingParams& p = {}) {
  p.validate();
  return ControlAffineModel(DockingDynamics{p}, "docking");
}
inline ControlAffineModel inspection_model(const InspectionParams& p = {}) {
  p.validate();
  return ControlAffineModel(InspectionDynamics{p}, "inspection");
}

struct PropagatorConfig {
  int substeps_per_hold = 10;
};

namespace detail {
inline void check_hold(const ControlAffineModel& model, const Eigen::VectorXd& u, double hold,
                       const PropagatorConfig& cfg) {
  if (cfg.substeps_per_hold < 1) throw std::invalid_argument("substeps_per_hold must be >= 1");
  if (!(hold > 0.0) || !std::isfinite(hold)) throw std::invalid_argument("hold duration must be > 0");
  if (u.size() != model.input_dim()) throw std::invalid_argument("control has wrong dimension");
  if (!model.input_set().contains(u, 1e-9)) throw std::invalid_argument("control outside input set");
}

inline Eigen::VectorXd rk4_step(const ControlAffineModel& model, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u, double h) {
  const Eigen::VectorXd k1 = model.derivative(x, u);
  const Eigen::VectorXd k2 = model.derivative(x + 0.5 * h * k1, u);
  const Eigen::VectorXd k3 = model.derivative(x + 0.5 * h * k2, u);
  const Eigen::VectorXd k4 = model.derivative(x + h * k3, u);
  Eigen::VectorXd next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw DivergenceError("non-finite state during propagation");
  return next;
}
}  // namespace detail

/// Integrates x' = f(x) + g(x)u over `hold` seconds with u held constant.
inline Eigen::VectorXd propagate_zoh(const ControlAffineModel& model, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& u, double hold,
                                     const PropagatorConfig& cfg = {}) {
  model.check_state(x0);
  detail::check_hold(model, u, hold, cfg);
  const double h = hold / cfg.substeps_per_hold;
  Eigen::VectorXd x = x0;
  for (int k = 0; k < cfg.substeps_per_hold; ++k) x = detail::rk4_step(model, x, u, h);
  return x;
}

/// Same integration, returning every substep state (first entry is x0).
inline std::vector<Eigen::VectorXd> propagate_zoh_trace(const ControlAffineModel& model,
                                                        const Eigen::VectorXd& x0,
                                                        const Eigen::VectorXd& u, double hold,
                                                        const PropagatorConfig& cfg = {}) {
  model.check_state(x0);
  detail::check_hold(model, u, hold, cfg);
  const double h = hold / cfg.substeps_per_hold;
  std::vector<Eigen::VectorXd> trace;
  trace.reserve(static_cast<std::size_t>(cfg.substeps_per_hold) + 1);
  trace.push_back(x0);
  for (int k = 0; k < cfg.substeps_per_hold; ++k) trace.push_back(detail::rk4_step(model, trace.back(), u, h));
  return trace;
}

}  // namespace iccbf
