#pragma once

// Initial-state sets, D/E tagging and the inspection observability metric.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "iccbf/iccbf_chain.hpp"
#include "iccbf/params.hpp"

namespace iccbf {

enum class SetTag { kD, kE, kUnsafe };

inline std::string to_string(SetTag t) {
  switch (t) {
    case SetTag::kD: return "D";
    case SetTag::kE: return "E";
    case SetTag::kUnsafe: return "unsafe";
  }
  return "?";
}

struct InitialState {
  Eigen::VectorXd x;
  SetTag tag = SetTag::kD;
};

struct InitialGrid {
  std::vector<std::string> labels;
  std::vector<InitialState> points;

  std::size_t size() const { return points.size(); }
  std::size_t count(SetTag t) const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [t](const InitialState& p) { return p.tag == t; }));
  }
  std::vector<Eigen::VectorXd> states(SetTag t) const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& p : points) {
      if (p.tag == t) out.push_back(p.x);
    }
    return out;
  }
  std::vector<Eigen::VectorXd> all_states() const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& p : points) out.push_back(p.x);
    return out;
  }
};

/// d in {0, 10, ..., 120} x v in {0, 1, ..., 24}, d-major. Tags are D until
/// `split_D_E` runs.
inline InitialGrid cruise_grid() {
  InitialGrid g;
  g.labels = {"d", "v"};
  for (int i = 0; i <= 12; ++i) {
    for (int j = 0; j <= 24; ++j) g.points.push_back({Eigen::Vector2d(10.0 * i, j), SetTag::kD});
  }
  return g;
}

/// D: every chain level >= 0 on every chain; E: h0 >= 0 everywhere but some
/// level negative; unsafe otherwise.
inline SetTag classify(const std::vector<BarrierChain>& chains, const Eigen::VectorXd& x) {
  bool in_s = true, in_c = true;
  for (const auto& c : chains) {
    const ChainMembership m = c.membership(x);
    in_s = in_s && m.in_S;
    in_c = in_c && m.in_Cstar;
  }
  if (!in_s) return SetTag::kUnsafe;
  return in_c ? SetTag::kD : SetTag::kE;
}

inline InitialGrid split_D_E(InitialGrid grid, const std::vector<BarrierChain>& chains) {
  for (auto& p : grid.points) p.tag = classify(chains, p.x);
  return grid;
}

inline InitialGrid split_D_E(InitialGrid grid, const BarrierChain& chain) {
  return split_D_E(std::move(grid), std::vector<BarrierChain>{chain});
}

/// How the lateral offset of docking starts is formed from theta_j.
enum class LateralOffset {
  kFromPort,  // p_y = (x1 - rho) tan(theta): the line of sight from the port is exactly theta
  kLiteral,   // p_y = x1 / tan(theta)
};

/// 100 starts at x1 = standoff, theta_j = -gamma + 2 gamma j / 99, at rest,
/// psi = 0.
inline InitialGrid docking_initials(const DockingParams& p = {}, LateralOffset mode = LateralOffset::kFromPort,
                                    int count = 100) {
  if (count < 2) throw std::invalid_argument("docking set needs at least two starts");
  InitialGrid g;
  g.labels = {"px", "py", "vx", "vy", "psi"};
  const double gam = p.cone_half_angle;
  for (int j = 0; j < count; ++j) {
    const double th = -gam + 2.0 * gam * j / (count - 1);
    const double py = mode == LateralOffset::kFromPort ? (p.standoff - p.port_radius) * std::tan(th)
                                                       : p.standoff / std::tan(th);
    Eigen::VectorXd x(5);
    x << p.standoff, py, 0.0, 0.0, 0.0;
    g.points.push_back({x, SetTag::kD});
  }
  return g;
}

/// x0 = [r0, 0, 0, 0, -2 n r0, vz0].
inline Eigen::VectorXd inspection_initial_state(const InspectionParams& p, double r0) {
  Eigen::VectorXd x(6);
  x << r0, 0.0, 0.0, 0.0, -2.0 * p.orbit.mean_motion() * r0, p.initial_vz;
  return x;
}

inline InitialGrid inspection_initials(const std::vector<double>& r0_values, const InspectionParams& p = {}) {
  InitialGrid g;
  g.labels = {"px", "py", "pz", "vx", "vy", "vz"};
  for (double r0 : r0_values) {
    if (!(r0 >= p.r_min && r0 <= p.r_max)) throw std::invalid_argument("r0 must lie in [r_min, r_max]");
    g.points.push_back({inspection_initial_state(p, r0), SetTag::kD});
  }
  return g;
}

/// `count` values of r0 equally spaced over [r_min, r_max].
inline std::vector<double> inspection_r0_sweep(const InspectionParams& p = {}, int count = 100) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(count == 1 ? p.r_min : p.r_min + (p.r_max - p.r_min) * i / (count - 1));
  return out;
}

/// Sun direction in LVLH: the inertial direction rotated by -n t about the
/// orbit normal (+z).
inline Eigen::Vector3d sun_direction_lvlh(const InspectionParams& p, double t) {
  const Eigen::Vector3d s(p.sun_inertial[0], p.sun_inertial[1], p.sun_inertial[2]);
  const double a = -p.orbit.mean_motion() * t;
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) * s.normalized();
}

/// Angle at the target between the Sun direction and the chaser position.
inline double gamma_angle(const InspectionParams& p, const Eigen::VectorXd& x, double t) {
  const Eigen::Vector3d r = x.head<3>();
  const double n = r.norm();
  if (!(n > 0.0)) throw SingularStateError("chaser at the target centre");
  const Eigen::Vector3d s = sun_direction_lvlh(p, t);
  return std::atan2(s.cross(r).norm(), s.dot(r));
}

inline double distance_weight(const InspectionParams& p, double rc) {
  if (rc < p.r_min) return rc / p.r_min;
  if (rc <= p.r_max) return 1.0;
  const double q = p.r_max / rc;
  return q * q * q;
}

/// f(t) (pi - gamma(t)) / pi.
inline double inspection_integrand(const InspectionParams& p, const Eigen::VectorXd& x, double t) {
  return distance_weight(p, x.head<3>().norm()) * (std::numbers::pi - gamma_angle(p, x, t)) / std::numbers::pi;
}

/// omega_gamma times the composite trapezoid of the integrand over samples
/// (times[k], states[k]).
inline double inspection_score_increment(const InspectionParams& p, const std::vector<double>& times,
                                         const std::vector<Eigen::VectorXd>& states) {
  if (times.size() != states.size()) throw std::invalid_argument("times and states differ in length");
  double acc = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    acc += 0.5 * dt * (inspection_integrand(p, states[k - 1], times[k - 1]) + inspection_integrand(p, states[k], times[k]));
  }
  return p.omega_gamma * acc;
}

/// Columns: state components, tag.
inline void write_grid_csv(const std::filesystem::path& path, const InitialGrid& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : g.labels) os << l << ',';
  os << "tag\n";
  os.precision(17);
  for (const auto& pt : g.points) {
    for (Eigen::Index i = 0; i < pt.x.size(); ++i) os << pt.x[i] << ',';
    os << to_string(pt.tag) << '\n';
  }
}

}  // namespace iccbf
