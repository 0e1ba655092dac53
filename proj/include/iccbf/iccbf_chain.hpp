#pragma once

// Input-constrained barrier chain b_0 ... b_N:
//   b_0 = h_0,  b_{i+1} = inf_{u in U} [Lf b_i + Lg b_i u] + alpha_i(b_i).
// Levels are evaluated with nested dual numbers, so every b_i comes with an
// exact gradient.

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iccbf/autodiff.hpp"
#include "iccbf/barrier.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/small_vec.hpp"

namespace iccbf {

inline constexpr int kMaxChainDepth = 3;

/// Recursive evaluator for the chain levels of a templated h0 functor.
template <class Dyn, class H0>
class ChainLevels {
 public:
  static constexpr std::size_t N = Dyn::kStateDim;

  ChainLevels(Dyn dyn, H0 h0, std::vector<ClassKFn> margins)
      : dyn_(std::move(dyn)), input_set_(dyn_.input_set()), h0_(std::move(h0)), margins_(std::move(margins)) {}

  template <int I, class S>
  S level(const Vec<S, N>& x) const {
    if constexpr (I == 0) {
      return h0_(x);
    } else {
      std::array<S, N> grad;
      S value{};
      std::array<Dual<S>, N> xd;
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) xd[j] = Dual<S>(x[j], S(i == j ? 1.0 : 0.0));
        const Dual<S> r = level<I - 1>(xd);
        grad[i] = r.d;
        if (i == 0) value = r.v;
      }
      const Vec<S, N> f = dyn_.drift(x);
      const auto g = dyn_.input_matrix(x);
      const S lf = dot(grad, f);
      const auto lg = left_multiply(grad, g);
      return lf - input_set_.support(lg) + margins_[static_cast<std::size_t>(I - 1)](value);
    }
  }

  double value(int i, const Eigen::VectorXd& x) const {
    const auto xv = from_eigen<N>(x);
    switch (i) {
      case 0: return level<0>(xv);
      case 1: return level<1>(xv);
      case 2: return level<2>(xv);
      case 3: return level<3>(xv);
    }
    throw std::out_of_range("chain level out of range");
  }

  Eigen::VectorXd gradient(int i, const Eigen::VectorXd& x) const {
    const auto xv = from_eigen<N>(x);
    switch (i) {
      case 0: return grad_at<0>(xv);
      case 1: return grad_at<1>(xv);
      case 2: return grad_at<2>(xv);
      case 3: return grad_at<3>(xv);
    }
    throw std::out_of_range("chain level out of range");
  }

 private:
  template <int I>
  Eigen::VectorXd grad_at(const Vec<double, N>& x) const {
    auto [v, g] = value_and_gradient<N>([this](const auto& xd) { return level<I>(xd); }, x);
    (void)v;
    return to_eigen(g);
  }

  Dyn dyn_;
  InputSet input_set_;
  H0 h0_;
  std::vector<ClassKFn> margins_;
};

struct ChainMembership {
  bool in_S = false;
  bool in_Cstar = false;
};

/// b_0 ... b_N with their margins and the terminal margin alpha_N.
class BarrierChain {
 public:
  BarrierChain(ControlAffineModel model, std::vector<ScalarField> fields, std::vector<ClassKFn> margins,
               ClassKFn terminal)
      : model_(std::move(model)), fields_(std::move(fields)), margins_(std::move(margins)), terminal_(terminal) {
    if (fields_.size() != margins_.size() + 1) throw std::invalid_argument("chain needs one margin per level");
  }

  int depth() const { return static_cast<int>(margins_.size()); }
  const ControlAffineModel& model() const { return model_; }
  const ScalarField& field(int i) const { return fields_.at(static_cast<std::size_t>(i)); }
  const ScalarField& h0() const { return fields_.front(); }
  const ScalarField& top() const { return fields_.back(); }
  const ClassKFn& margin(int i) const { return margins_.at(static_cast<std::size_t>(i)); }
  const ClassKFn& terminal_margin() const { return terminal_; }

  std::vector<double> values(const Eigen::VectorXd& x) const {
    std::vector<double> out;
    out.reserve(fields_.size());
    for (const auto& f : fields_) out.push_back(f(x));
    return out;
  }

  ChainMembership membership(const Eigen::VectorXd& x) const {
    ChainMembership m;
    m.in_S = fields_.front()(x) >= 0.0;
    m.in_Cstar = m.in_S;
    for (std::size_t i = 1; i < fields_.size() && m.in_Cstar; ++i) m.in_Cstar = fields_[i](x) >= 0.0;
    return m;
  }

  /// Pointwise ICCBF condition: sup_u [Lf b_N + Lg b_N u] + alpha_N(b_N) >= 0.
  bool condition_holds(const Eigen::VectorXd& x) const {
    return best_case_margin(model_, fields_.back(), terminal_, x) >= 0.0;
  }

 private:
  ControlAffineModel model_;
  std::vector<ScalarField> fields_;
  std::vector<ClassKFn> margins_;
  ClassKFn terminal_;
};

inline ChainMembership chain_membership(const BarrierChain& chain, const Eigen::VectorXd& x) {
  return chain.membership(x);
}

inline bool iccbf_condition_check(const BarrierChain& chain, const Eigen::VectorXd& x) {
  return chain.condition_holds(x);
}

/// Builds b_0 ... b_N (1 <= N <= 3) from a templated h0 functor.
template <ControlAffineDynamics Dyn, class H0>
BarrierChain build_iccbf_chain(const Dyn& dyn, const std::string& name, const H0& h0,
                               const std::vector<ClassKFn>& margins,
                               ClassKFn terminal = ClassKFn::linear(1.0)) {
  const int n = static_cast<int>(margins.size());
  if (n < 1 || n > kMaxChainDepth) throw std::invalid_argument("chain depth must lie in [1, 3]");
  auto levels = std::make_shared<const ChainLevels<Dyn, H0>>(dyn, h0, margins);
  std::vector<ScalarField> fields;
  for (int i = 0; i <= n; ++i) {
    fields.emplace_back(
        name + "_b" + std::to_string(i), [levels, i](const Eigen::VectorXd& x) { return levels->value(i, x); },
        [levels, i](const Eigen::VectorXd& x) { return levels->gradient(i, x); });
  }
  return BarrierChain(ControlAffineModel(dyn, name), std::move(fields), margins, terminal);
}

struct ChainGains {
  std::vector<ClassKFn> margins{ClassKFn::linear(4.0), ClassKFn::linear(7.0)};
  ClassKFn terminal = ClassKFn::linear(1.0);
};

inline BarrierChain cruise_chain(const CruiseParams& p = {}, const ChainGains& gains = {}) {
  p.validate();
  return build_iccbf_chain(CruiseDynamics{p}, "cruise", CruiseSafety{p.headway}, gains.margins, gains.terminal);
}

/// Docking needs much slower margins: with the benchmark defaults the port
/// rotation drives b_2 to zero long before its tiny Lg b_2 can act.
inline ChainGains docking_gains() {
  return {{ClassKFn::linear(0.1), ClassKFn::linear(0.1)}, ClassKFn::linear(1.0)};
}

inline BarrierChain docking_chain(const DockingParams& p = {}, const ChainGains& gains = docking_gains()) {
  p.validate();
  return build_iccbf_chain(DockingDynamics{p}, "docking", DockingLineOfSight{p.port_radius, p.cone_half_angle},
                           gains.margins, gains.terminal);
}

inline BarrierChain koz_chain(const InspectionParams& p = {}, const ChainGains& gains = {}) {
  p.validate();
  return build_iccbf_chain(InspectionDynamics{p}, "koz", KeepOutZone{p.r_koz, p.r_kiz}, gains.margins,
                           gains.terminal);
}

inline BarrierChain kiz_chain(const InspectionParams& p = {}, const ChainGains& gains = {}) {
  p.validate();
  return build_iccbf_chain(InspectionDynamics{p}, "kiz", KeepInZone{p.r_koz, p.r_kiz}, gains.margins,
                           gains.terminal);
}

}  // namespace iccbf
