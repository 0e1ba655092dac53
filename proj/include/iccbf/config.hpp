#pragma once

// Scenario configuration: flat INI sections ([cruise], [docking],
// [inspection], [ppo], [run]) with strict keys. Keys carry their file unit in
// the name (_deg, _km, _h); values are converted to SI on load.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "iccbf/env.hpp"
#include "iccbf/inspection_env.hpp"
#include "iccbf/params.hpp"
#include "iccbf/ppo.hpp"

namespace iccbf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scalar knobs of a benchmark run that are not physical constants.
struct BenchmarkKnobs {
  double dt = 0.1;
  double t_final = 20.0;
  double alpha_min = 0.1, alpha_max = 10.0;
  double beta_min = 0.1, beta_max = 10.0;
  double c_h = 100.0, c_u = 1.0;
  double baseline_alpha = 1.0, baseline_beta = 1.0;
  double p1 = 1e3, p2 = 1e3;
  double violation_tol = 1e-9;
  int substeps = 10;
};

struct GainKnobs {
  double k0 = 4.0, k1 = 7.0, k_terminal = 1.0;

  ChainGains gains() const { return {{ClassKFn::linear(k0), ClassKFn::linear(k1)}, ClassKFn::linear(k_terminal)}; }
};

struct PpoKnobs {
  long total_steps = 50000;
  int eval_episodes = 10;
  int hidden_width = 64;
  int hidden_layers = 4;
};

struct Config {
  CruiseParams cruise;
  BenchmarkKnobs cruise_run;
  GainKnobs cruise_gains;

  DockingParams docking;
  BenchmarkKnobs docking_run{0.5, 50.0};
  GainKnobs docking_gains{0.1, 0.1, 1.0};
  bool docking_literal_offset = false;

  InspectionParams inspection;
  GainKnobs inspection_gains;
  double insp_alpha_min = 0.1, insp_alpha_max = 10.0;
  double insp_c_h1 = 1.0, insp_c_h2 = 1.0, insp_c_i = 0.1;
  bool insp_literal_metric_sign = false;
  double insp_baseline_alpha = 1.0;
  double insp_p2 = 1e3, insp_p3 = 1e3;
  int insp_initial_count = 100;

  PpoKnobs ppo;
  std::uint64_t seed = 1;
  int threads = 1;
};

namespace detail {

struct Binding {
  std::string section, key;
  std::variant<double*, int*, long*, bool*, std::uint64_t*> target;
  double scale = 1.0;  // SI value = file value * scale
};

inline std::vector<Binding> bindings(Config& c) {
  const double deg = std::numbers::pi / 180.0;
  std::vector<Binding> b;
  auto knobs = [&b](const std::string& s, BenchmarkKnobs& k) {
    b.push_back({s, "dt", &k.dt});
    b.push_back({s, "t_final", &k.t_final});
    b.push_back({s, "alpha_min", &k.alpha_min});
    b.push_back({s, "alpha_max", &k.alpha_max});
    b.push_back({s, "beta_min", &k.beta_min});
    b.push_back({s, "beta_max", &k.beta_max});
    b.push_back({s, "c_h", &k.c_h});
    b.push_back({s, "c_u", &k.c_u});
    b.push_back({s, "baseline_alpha", &k.baseline_alpha});
    b.push_back({s, "baseline_beta", &k.baseline_beta});
    b.push_back({s, "p1", &k.p1});
    b.push_back({s, "p2", &k.p2});
    b.push_back({s, "violation_tol", &k.violation_tol});
    b.push_back({s, "substeps", &k.substeps});
  };
  auto gains = [&b](const std::string& s, GainKnobs& g) {
    b.push_back({s, "k0", &g.k0});
    b.push_back({s, "k1", &g.k1});
    b.push_back({s, "k_terminal", &g.k_terminal});
  };
  auto orbit = [&b](const std::string& s, OrbitParams& o) {
    b.push_back({s, "orbit_radius_km", &o.radius, 1e3});
    b.push_back({s, "mu_km3_s2", &o.mu, 1e9});
  };

  const std::string cr = "cruise";
  b.push_back({cr, "mass", &c.cruise.mass});
  b.push_back({cr, "g0", &c.cruise.g0});
  b.push_back({cr, "f0", &c.cruise.f0});
  b.push_back({cr, "f1", &c.cruise.f1});
  b.push_back({cr, "f2", &c.cruise.f2});
  b.push_back({cr, "lead_speed", &c.cruise.lead_speed});
  b.push_back({cr, "u_max", &c.cruise.u_max});
  b.push_back({cr, "v_max", &c.cruise.v_max});
  b.push_back({cr, "headway", &c.cruise.headway});
  gains(cr, c.cruise_gains);
  knobs(cr, c.cruise_run);

  const std::string dk = "docking";
  orbit(dk, c.docking.orbit);
  b.push_back({dk, "chaser_mass", &c.docking.chaser_mass});
  b.push_back({dk, "u_max", &c.docking.u_max});
  b.push_back({dk, "port_rate_deg_s", &c.docking.port_rate, deg});
  b.push_back({dk, "port_radius", &c.docking.port_radius});
  b.push_back({dk, "cone_half_angle_deg", &c.docking.cone_half_angle, deg});
  b.push_back({dk, "clf_time_constant", &c.docking.clf_time_constant});
  b.push_back({dk, "standoff", &c.docking.standoff});
  b.push_back({dk, "docked_threshold", &c.docking.docked_threshold});
  b.push_back({dk, "literal_offset", &c.docking_literal_offset});
  gains(dk, c.docking_gains);
  knobs(dk, c.docking_run);

  const std::string in = "inspection";
  orbit(in, c.inspection.orbit);
  b.push_back({in, "chaser_mass", &c.inspection.chaser_mass});
  b.push_back({in, "u_max", &c.inspection.u_max});
  b.push_back({in, "r_kiz", &c.inspection.r_kiz});
  b.push_back({in, "r_koz", &c.inspection.r_koz});
  b.push_back({in, "r_min", &c.inspection.r_min});
  b.push_back({in, "r_max", &c.inspection.r_max});
  b.push_back({in, "mission_time_h", &c.inspection.mission_time, 3600.0});
  b.push_back({in, "dv_min_mm_s", &c.inspection.dv_min, 1e-3});
  b.push_back({in, "dv_max_mm_s", &c.inspection.dv_max, 1e-3});
  b.push_back({in, "coast_min_h", &c.inspection.coast_min, 3600.0});
  b.push_back({in, "coast_max_h", &c.inspection.coast_max, 3600.0});
  b.push_back({in, "omega_gamma", &c.inspection.omega_gamma});
  b.push_back({in, "sun_x", &c.inspection.sun_inertial[0]});
  b.push_back({in, "sun_y", &c.inspection.sun_inertial[1]});
  b.push_back({in, "sun_z", &c.inspection.sun_inertial[2]});
  b.push_back({in, "initial_vz", &c.inspection.initial_vz});
  gains(in, c.inspection_gains);
  b.push_back({in, "alpha_min", &c.insp_alpha_min});
  b.push_back({in, "alpha_max", &c.insp_alpha_max});
  b.push_back({in, "c_h1", &c.insp_c_h1});
  b.push_back({in, "c_h2", &c.insp_c_h2});
  b.push_back({in, "c_i", &c.insp_c_i});
  b.push_back({in, "literal_metric_sign", &c.insp_literal_metric_sign});
  b.push_back({in, "baseline_alpha", &c.insp_baseline_alpha});
  b.push_back({in, "p2", &c.insp_p2});
  b.push_back({in, "p3", &c.insp_p3});
  b.push_back({in, "initial_count", &c.insp_initial_count});

  b.push_back({"ppo", "total_steps", &c.ppo.total_steps});
  b.push_back({"ppo", "eval_episodes", &c.ppo.eval_episodes});
  b.push_back({"ppo", "hidden_width", &c.ppo.hidden_width});
  b.push_back({"ppo", "hidden_layers", &c.ppo.hidden_layers});

  b.push_back({"run", "seed", &c.seed});
  b.push_back({"run", "threads", &c.threads});
  return b;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad value '" + text + "' for " + where);
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads an INI file over the defaults. Unknown sections or keys are errors.
inline Config load_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  Config c;
  auto binds = detail::bindings(c);
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, node] : keys) {
      const std::string where = section + "." + key;
      const std::string text = node.get_value<std::string>();
      bool found = false;
      for (auto& b : binds) {
        if (b.section != section || b.key != key) continue;
        found = true;
        std::visit(
            [&](auto* p) {
              using T = std::remove_pointer_t<decltype(p)>;
              if constexpr (std::is_same_v<T, bool>) {
                if (text == "true" || text == "1") *p = true;
                else if (text == "false" || text == "0") *p = false;
                else throw ConfigError("bad boolean '" + text + "' for " + where);
              } else if constexpr (std::is_same_v<T, double>) {
                *p = detail::parse_number<double>(text, where) * b.scale;
              } else {
                *p = detail::parse_number<T>(text, where);
              }
            },
            b.target);
      }
      if (!found) throw ConfigError("unknown config key " + where);
    }
  }
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  return load_config(is);
}

/// Canonical INI text of every key (file units, fixed order).
inline std::string to_ini(const Config& cfg) {
  Config c = cfg;
  std::ostringstream os;
  std::string section;
  for (const auto& b : detail::bindings(c)) {
    if (b.section != section) {
      if (!section.empty()) os << '\n';
      section = b.section;
      os << '[' << section << "]\n";
    }
    os << b.key << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) os << (*p ? "true" : "false");
          else if constexpr (std::is_same_v<T, double>) os << detail::format_double(*p / b.scale);
          else os << *p;
        },
        b.target);
    os << '\n';
  }
  return os.str();
}

/// FNV-1a over the canonical text, as 16 hex digits.
inline std::string config_hash(const Config& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_ini(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {
inline void apply_knobs(BenchmarkSettings& s, const BenchmarkKnobs& k) {
  s.dt = k.dt;
  s.t_final = k.t_final;
  s.alpha_min = k.alpha_min;
  s.alpha_max = k.alpha_max;
  s.beta_min = k.beta_min;
  s.beta_max = k.beta_max;
  s.c_h = k.c_h;
  s.c_u = k.c_u;
  s.baseline_alpha = k.baseline_alpha;
  s.baseline_beta = k.baseline_beta;
  s.penalties.p1 = k.p1;
  s.penalties.p2 = k.p2;
  s.violation_tol = k.violation_tol;
  s.propagator.substeps_per_hold = k.substeps;
}
}  // namespace detail

inline BenchmarkProblem cruise_problem(const Config& c) {
  BenchmarkSettings s = cruise_settings(c.cruise);
  detail::apply_knobs(s, c.cruise_run);
  return cruise_problem(c.cruise, c.cruise_gains.gains(), s);
}

inline BenchmarkProblem docking_problem(const Config& c) {
  BenchmarkSettings s = docking_settings(c.docking);
  detail::apply_knobs(s, c.docking_run);
  return docking_problem(c.docking, c.docking_gains.gains(), s,
                         c.docking_literal_offset ? LateralOffset::kLiteral : LateralOffset::kFromPort);
}

inline BenchmarkProblem benchmark_problem(const Config& c, const std::string& scenario) {
  if (scenario == "cruise") return cruise_problem(c);
  if (scenario == "docking") return docking_problem(c);
  throw ConfigError("unknown benchmark scenario '" + scenario + "'");
}

inline InspectionProblem inspection_problem(const Config& c) {
  InspectionSettings s = inspection_settings(c.inspection);
  s.alpha_min = c.insp_alpha_min;
  s.alpha_max = c.insp_alpha_max;
  s.c_h1 = c.insp_c_h1;
  s.c_h2 = c.insp_c_h2;
  s.c_i = c.insp_c_i;
  s.literal_metric_sign = c.insp_literal_metric_sign;
  s.baseline_alpha = c.insp_baseline_alpha;
  s.penalties.p2 = c.insp_p2;
  s.penalties.p3 = c.insp_p3;
  return inspection_problem(c.inspection, c.inspection_gains.gains(), s, c.insp_initial_count);
}

/// Preset for (scenario, stage) with the [ppo] overrides applied.
inline PpoConfig ppo_config(const Config& c, const std::string& scenario, int stage) {
  PpoConfig p = ppo_preset(scenario, stage);
  p.total_steps = c.ppo.total_steps;
  p.eval_episodes = c.ppo.eval_episodes;
  p.hidden_width = c.ppo.hidden_width;
  p.hidden_layers = c.ppo.hidden_layers;
  return p;
}

}  // namespace iccbf
