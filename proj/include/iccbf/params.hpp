#pragma once

// Scenario constant records. Everything is SI (m, s, kg, N, rad).

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace iccbf {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct InvalidParams : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParams(what);
}
}  // namespace detail

struct OrbitParams {
  double radius = 6771.0e3;    // target orbit radius [m]
  double mu = 398600.0e9;      // Earth gravitational parameter [m^3/s^2]

  double mean_motion() const { return std::sqrt(mu / (radius * radius * radius)); }

  void validate() const {
    detail::require(radius > 0.0 && std::isfinite(radius), "orbit radius must be positive");
    detail::require(mu > 0.0 && std::isfinite(mu), "mu must be positive");
  }
};

/// Point-mass follower behind a lead vehicle. The control is a normalized
/// acceleration command multiplied by g0.
struct CruiseParams {
  double mass = 1650.0;
  double g0 = 9.81;
  double f0 = 0.1;
  double f1 = 5.0;
  double f2 = 0.25;
  double lead_speed = 13.89;
  double u_max = 0.25;
  double v_max = 24.0;
  double headway = 1.8;  // safe set d >= headway * v

  void validate() const {
    detail::require(mass > 0.0, "cruise mass must be positive");
    detail::require(g0 > 0.0, "cruise g0 must be positive");
    detail::require(u_max > 0.0, "cruise u_max must be positive");
    detail::require(v_max > 0.0, "cruise v_max must be positive");
    detail::require(headway > 0.0, "cruise headway must be positive");
    detail::require(std::isfinite(f0) && std::isfinite(f1) && std::isfinite(f2) &&
                        std::isfinite(lead_speed),
                    "cruise drag and lead speed must be finite");
  }
};

/// Planar rendezvous with a port on a disk rotating in the LVLH frame.
struct DockingParams {
  OrbitParams orbit;
  double chaser_mass = 1000.0;
  double u_max = 250.0;                        // 0.25 kN
  double port_rate = deg_to_rad(0.6);          // omega [rad/s]
  double port_radius = 2.4;                    // rho [m]
  double cone_half_angle = deg_to_rad(10.0);   // gamma [rad]
  double clf_time_constant = 10.0;             // V = |v + (p - port)/tau|^2
  double standoff = 500.0;                     // initial x1 [m]
  double docked_threshold = 5.0e-5;            // early stop when V below this

  void validate() const {
    orbit.validate();
    detail::require(chaser_mass > 0.0, "docking chaser mass must be positive");
    detail::require(u_max > 0.0, "docking u_max must be positive");
    detail::require(port_radius >= 0.0, "docking port radius must be non-negative");
    detail::require(cone_half_angle > 0.0 && cone_half_angle < std::numbers::pi / 2,
                    "docking cone half-angle must lie in (0, pi/2)");
    detail::require(clf_time_constant > 0.0, "docking CLF time constant must be positive");
    detail::require(standoff > port_radius, "docking standoff must exceed the port radius");
  }
};

/// 3-D inspection of a resident space object.
struct InspectionParams {
  OrbitParams orbit;
  double chaser_mass = 50.0;
  double u_max = 0.05;
  double r_kiz = 1200.0;
  double r_koz = 15.0;
  double r_min = 50.0;
  double r_max = 300.0;
  double mission_time = 48.0 * 3600.0;
  double dv_min = 3.0e-3;
  double dv_max = 90.0e-3;
  double coast_min = 3600.0;
  double coast_max = 3.0 * 3600.0;
  double omega_gamma = 1.0;
  std::array<double, 3> sun_inertial{1.0, 0.0, 0.0};
  double initial_vz = 0.431;

  double burn_min() const { return dv_min / (u_max / chaser_mass); }
  double burn_max() const { return dv_max / (u_max / chaser_mass); }

  void validate() const {
    orbit.validate();
    detail::require(chaser_mass > 0.0, "inspection chaser mass must be positive");
    detail::require(u_max > 0.0, "inspection u_max must be positive");
    detail::require(r_koz > 0.0 && r_koz < r_min && r_min < r_max && r_max < r_kiz,
                    "inspection radii must satisfy r_koz < r_min < r_max < r_kiz");
    detail::require(dv_min > 0.0 && dv_min < dv_max, "inspection dv bounds must be ordered");
    detail::require(coast_min > 0.0 && coast_min < coast_max,
                    "inspection coast bounds must be ordered");
    detail::require(mission_time > 0.0, "inspection mission time must be positive");
    const double s = std::hypot(sun_inertial[0], sun_inertial[1], sun_inertial[2]);
    detail::require(s > 0.0, "sun direction must be nonzero");
  }
};

}  // namespace iccbf
