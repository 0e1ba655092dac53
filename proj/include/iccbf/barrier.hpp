#pragma once

// Scalar fields, class-K margins, Lie derivatives and the nominal safety
// fields / CLFs of the three scenarios.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "iccbf/autodiff.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/small_vec.hpp"

namespace iccbf {

/// Strictly increasing function with value 0 at 0.
///   linear:       k s
///   power:        k sgn(s) |s|^p
///   scaled_atan:  k c atan(s / c)   (slope k at the origin, saturates at ±k c π/2)
class ClassKFn {
 public:
  enum class Kind { kLinear, kPower, kScaledAtan };

  static ClassKFn linear(double k) { return ClassKFn(Kind::kLinear, k, 1.0); }
  static ClassKFn power(double k, double p) { return ClassKFn(Kind::kPower, k, p); }
  static ClassKFn scaled_atan(double k, double c) { return ClassKFn(Kind::kScaledAtan, k, c); }

  ClassKFn() : ClassKFn(Kind::kLinear, 1.0, 1.0) {}

  Kind kind() const { return kind_; }
  double gain() const { return gain_; }
  double shape() const { return shape_; }

  template <class S>
  S operator()(const S& s) const {
    using std::abs, std::atan, std::pow;
    switch (kind_) {
      case Kind::kLinear:
        return gain_ * s;
      case Kind::kPower: {
        if (value_of(s) == 0.0 && shape_ < 1.0) return s * 0.0;
        const S mag = pow(abs(s), shape_);
        return value_of(s) >= 0.0 ? S(gain_ * mag) : S(-gain_ * mag);
      }
      case Kind::kScaledAtan:
        return gain_ * shape_ * atan(s / shape_);
    }
    return s;
  }

  /// "linear:4", "power:1:3", "scaled_atan:2:0.5".
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::kLinear: os << "linear:" << gain_; break;
      case Kind::kPower: os << "power:" << gain_ << ':' << shape_; break;
      case Kind::kScaledAtan: os << "scaled_atan:" << gain_ << ':' << shape_; break;
    }
    return os.str();
  }

  static ClassKFn parse(const std::string& text) {
    std::istringstream is(text);
    std::string kind, a, b;
    std::getline(is, kind, ':');
    std::getline(is, a, ':');
    std::getline(is, b, ':');
    try {
      if (kind == "linear" && !a.empty()) return linear(std::stod(a));
      if (kind == "power" && !a.empty() && !b.empty()) return power(std::stod(a), std::stod(b));
      if (kind == "scaled_atan" && !a.empty() && !b.empty()) return scaled_atan(std::stod(a), std::stod(b));
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
    throw std::invalid_argument("cannot parse class-K function '" + text + "'");
  }

 private:
  ClassKFn(Kind kind, double gain, double shape) : kind_(kind), gain_(gain), shape_(shape) {
    if (!(gain > 0.0) || !(shape > 0.0) || !std::isfinite(gain) || !std::isfinite(shape)) {
      throw std::invalid_argument("class-K parameters must be positive and finite");
    }
  }

  Kind kind_;
  double gain_;
  double shape_;
};

/// Central differences with per-component step 1e-6 (1 + |x_i|).
template <class Fn>
Eigen::VectorXd gradient_fd(const Fn& fn, const Eigen::VectorXd& x, double rel_step = 1e-6) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = fn(xp);
    xp[i] = x[i] - h;
    const double fm = fn(xp);
    xp[i] = x[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

/// A differentiable scalar function of the state. The gradient is exact
/// (forward-mode AD) when the field was built from a templated functor, and
/// central differences otherwise.
class ScalarField {
 public:
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  ScalarField() = default;
  ScalarField(std::string name, ValueFn value, GradientFn gradient = {})
      : name_(std::move(name)), value_(std::move(value)), gradient_(std::move(gradient)) {}

  const std::string& name() const { return name_; }
  bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }

  double operator()(const Eigen::VectorXd& x) const { return value_(x); }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    if (gradient_) return gradient_(x);
    return gradient_fd(value_, x);
  }

  /// Same field with the analytic gradient dropped.
  ScalarField with_fd_gradient() const { return ScalarField(name_ + "[fd]", value_); }

 private:
  std::string name_;
  ValueFn value_;
  GradientFn gradient_;
};

/// Wraps a functor `template <class S> S operator()(const Vec<S, N>&)` as a
/// ScalarField with an AD gradient.
template <std::size_t N, class Functor>
ScalarField make_field(std::string name, Functor fn) {
  auto shared = std::make_shared<const Functor>(std::move(fn));
  auto value = [shared](const Eigen::VectorXd& x) -> double {
    if (x.size() != static_cast<Eigen::Index>(N)) throw std::invalid_argument("field evaluated at wrong dimension");
    return (*shared)(from_eigen<N>(x));
  };
  auto gradient = [shared](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (x.size() != static_cast<Eigen::Index>(N)) throw std::invalid_argument("field evaluated at wrong dimension");
    auto [v, g] = value_and_gradient<N>([&](const auto& xd) { return (*shared)(xd); }, from_eigen<N>(x));
    (void)v;
    return to_eigen(g);
  };
  return ScalarField(std::move(name), value, gradient);
}

/// A CLF V with its decay margin.
struct ClfSpec {
  ScalarField field;
  ClassKFn margin;
};

struct LieDerivatives {
  double lf = 0.0;
  Eigen::VectorXd lg;
};

inline LieDerivatives lie_derivatives(const ControlAffineModel& model, const ScalarField& field,
                                      const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = field.gradient(x);
  return {grad.dot(model.drift(x)), model.input_matrix(x).transpose() * grad};
}

/// inf over U of [Lf b + Lg b·u + alpha(b)].
inline double worst_case_margin(const ControlAffineModel& model, const ScalarField& field,
                                const ClassKFn& margin, const Eigen::VectorXd& x) {
  const LieDerivatives ld = lie_derivatives(model, field, x);
  return ld.lf - model.input_set().support(ld.lg) + margin(field(x));
}

/// sup over U of [Lf b + Lg b·u + alpha(b)].
inline double best_case_margin(const ControlAffineModel& model, const ScalarField& field,
                               const ClassKFn& margin, const Eigen::VectorXd& x) {
  const LieDerivatives ld = lie_derivatives(model, field, x);
  return ld.lf + model.input_set().support(ld.lg) + margin(field(x));
}

// ---------------------------------------------------------------------------
// Scenario fields. Each functor is templated on the scalar so that the chain
// builder can differentiate through it.

/// h0 = d - headway * v.
struct CruiseSafety {
  double headway = 1.8;
  template <class S>
  S operator()(const Vec<S, 2>& x) const {
    return x[0] - headway * x[1];
  }
};

/// V = (v - v_max)^2.
struct CruiseClf {
  double v_max = 24.0;
  template <class S>
  S operator()(const Vec<S, 2>& x) const {
    const S e = x[1] - v_max;
    return e * e;
  }
};

/// Line of sight: cos(theta) - cos(gamma), theta measured from the port axis.
struct DockingLineOfSight {
  double port_radius = 2.4;
  double cone_half_angle = deg_to_rad(10.0);
  template <class S>
  S operator()(const Vec<S, 5>& x) const {
    using std::cos, std::sin, std::sqrt;
    const S c = cos(x[4]);
    const S s = sin(x[4]);
    const S rx = x[0] - port_radius * c;
    const S ry = x[1] - port_radius * s;
    const S range = sqrt(rx * rx + ry * ry);
    if (!(value_of(range) > 0.0)) throw SingularStateError("chaser on the docking port");
    return (rx * c + ry * s) / range - std::cos(cone_half_angle);
  }
};

/// V = |v + (p - port)/tau|^2.
struct DockingClf {
  double port_radius = 2.4;
  double time_constant = 10.0;
  template <class S>
  S operator()(const Vec<S, 5>& x) const {
    using std::cos, std::sin;
    const S ex = x[2] + (x[0] - port_radius * cos(x[4])) / time_constant;
    const S ey = x[3] + (x[1] - port_radius * sin(x[4])) / time_constant;
    return ex * ex + ey * ey;
  }
};

/// (|p|^2 - r_koz^2) / (r_kiz^2 - r_koz^2).
struct KeepOutZone {
  double r_koz = 15.0;
  double r_kiz = 1200.0;
  template <class S>
  S operator()(const Vec<S, 6>& x) const {
    const S r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return (r2 - r_koz * r_koz) / (r_kiz * r_kiz - r_koz * r_koz);
  }
};

/// (r_kiz^2 - |p|^2) / (r_kiz^2 - r_koz^2).
struct KeepInZone {
  double r_koz = 15.0;
  double r_kiz = 1200.0;
  template <class S>
  S operator()(const Vec<S, 6>& x) const {
    const S r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return (r_kiz * r_kiz - r2) / (r_kiz * r_kiz - r_koz * r_koz);
  }
};

/// Mean of the two inspection zone fields. Identically 1/2 for these
/// normalizations; kept as a field so the combined barrier stays literal.
struct InspectionCombined {
  double r_koz = 15.0;
  double r_kiz = 1200.0;
  template <class S>
  S operator()(const Vec<S, 6>& x) const {
    return 0.5 * (KeepOutZone{r_koz, r_kiz}(x) + KeepInZone{r_koz, r_kiz}(x));
  }
};

/// V = 0; the inspection task has no convergence objective.
template <std::size_t N>
struct ZeroField {
  template <class S>
  S operator()(const Vec<S, N>& /*x*/) const {
    return S(0.0);
  }
};

inline ScalarField cruise_h0(const CruiseParams& p = {}) {
  return make_field<2>("cruise_h0", CruiseSafety{p.headway});
}
inline ClfSpec cruise_clf(const CruiseParams& p = {}, ClassKFn margin = ClassKFn::linear(1.0)) {
  return {make_field<2>("cruise_clf", CruiseClf{p.v_max}), margin};
}
inline ScalarField docking_h0(const DockingParams& p = {}) {
  return make_field<5>("docking_h0", DockingLineOfSight{p.port_radius, p.cone_half_angle});
}
inline ClfSpec docking_clf(const DockingParams& p = {}, ClassKFn margin = ClassKFn::linear(1.0)) {
  return {make_field<5>("docking_clf", DockingClf{p.port_radius, p.clf_time_constant}), margin};
}
inline ScalarField koz_h0(const InspectionParams& p = {}) {
  return make_field<6>("koz_h0", KeepOutZone{p.r_koz, p.r_kiz});
}
inline ScalarField kiz_h0(const InspectionParams& p = {}) {
  return make_field<6>("kiz_h0", KeepInZone{p.r_koz, p.r_kiz});
}

}  // namespace iccbf
