#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "iccbf/env.hpp"
#include "iccbf/inspection_env.hpp"

using Catch::Approx;
using namespace iccbf;

namespace {

GaussianPolicy random_policy(int obs, int act, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GaussianPolicy pi = GaussianPolicy::create(obs, act, rng, 0.2, 16, 2);
  // Larger output weights so the barrier head actually varies with x.
  pi.mean_net().weight(pi.mean_net().num_layers() - 1) *= 50.0;
  return pi;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / (1e-12 + b.norm()); }

}  // namespace

TEST_CASE("observation scaling", "[env]") {
  ObservationBounds b{Eigen::Vector3d(0.0, -1.0, 2.0), Eigen::Vector3d(10.0, 1.0, 2.0)};
  const Eigen::VectorXd s = scale_observation(Eigen::Vector3d(2.5, 3.0, 7.0), b);
  CHECK(s[0] == Approx(-0.5));
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 0.0);
  const Eigen::VectorXd d = scale_observation_slope(Eigen::Vector3d(2.5, 3.0, 7.0), b);
  CHECK(d[0] == Approx(0.2));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 0.0);
  CHECK_THROWS(scale_observation(Eigen::Vector2d(1, 2), b));
}

TEST_CASE("Stage-2 observation map", "[env]") {
  const auto pb = docking_problem();
  Eigen::VectorXd x(5);
  x << 350.0, 20.0, -0.4, 0.1, 0.2;
  const Eigen::VectorXd s = pb.stage2_obs.value(x);
  REQUIRE(s.size() == 10);
  const LieDerivatives ld = lie_derivatives(pb.model, pb.h0(), x);
  CHECK(s.head(5).isApprox(x));
  CHECK((s.segment(5, 2) - ld.lg).norm() < 1e-14);
  CHECK(s[7] == Approx(ld.lf));
  CHECK(s[8] == Approx(pb.h0()(x)));
  CHECK(s[9] == Approx(pb.clf.field(x)));
  const Eigen::MatrixXd J = pb.stage2_obs.jacobian(x);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd fd = gradient_fd([&](const Eigen::VectorXd& z) { return pb.stage2_obs.value(z)[k]; }, x);
    CHECK((J.row(k).transpose() - fd).norm() < 1e-6 * (1.0 + fd.norm()));
  }
}

TEST_CASE("composite barrier gradient agrees with finite differences", "[env][gradient]") {
  const auto cruise = cruise_problem();
  const GaussianPolicy pc = random_policy(cruise.stage2_obs.dim, 3, 5);
  auto value = [&](const BenchmarkProblem& pb, const GaussianPolicy& pi, const Eigen::VectorXd& z) {
    return composite_barrier(pb.h0(), pb.stage2_obs, pb.settings.stage2_bounds, pb.hbar0, pi, 0, z).value;
  };
  for (const Eigen::Vector2d& x : {Eigen::Vector2d(40.0, 20.5), Eigen::Vector2d(70.0, 12.0), Eigen::Vector2d(100.0, 3.0)}) {
    const CompositeBarrier cb =
        composite_barrier(cruise.h0(), cruise.stage2_obs, cruise.settings.stage2_bounds, cruise.hbar0, pc, 0, x);
    const Eigen::VectorXd fd = gradient_fd([&](const Eigen::VectorXd& z) { return value(cruise, pc, z); }, x);
    CHECK(rel(cb.gradient, fd) < 1e-5);
    CHECK(cb.value == Approx(cruise.h0()(x) + cruise.hbar0 * std::tanh(pc.mean(stage2_observation(cruise, x))[0])));
  }

  const auto dock = docking_problem();
  const GaussianPolicy pd = random_policy(dock.stage2_obs.dim, 3, 6);
  Eigen::VectorXd x(5);
  x << 450.0, -40.0, 0.3, 0.6, 0.1;
  const CompositeBarrier cb =
      composite_barrier(dock.h0(), dock.stage2_obs, dock.settings.stage2_bounds, dock.hbar0, pd, 0, x);
  const Eigen::VectorXd fd = gradient_fd([&](const Eigen::VectorXd& z) { return value(dock, pd, z); }, x);
  CHECK(rel(cb.gradient, fd) < 1e-5);
}

TEST_CASE("a sampled barrier head is used as given", "[env]") {
  const auto pb = cruise_problem();
  const GaussianPolicy pi = random_policy(pb.stage2_obs.dim, 3, 2);
  const Eigen::Vector2d x(60.0, 15.0);
  const CompositeBarrier cb = composite_barrier(pb.h0(), pb.stage2_obs, pb.settings.stage2_bounds, pb.hbar0, pi, 0, x, 0.7);
  CHECK(cb.head == Approx(std::tanh(0.7)));
  CHECK(cb.value == Approx(pb.h0()(x) + pb.hbar0 * std::tanh(0.7)));
}

TEST_CASE("benchmark environment step bookkeeping", "[env]") {
  auto pb = std::make_shared<const BenchmarkProblem>(cruise_problem());
  const Eigen::Vector2d x0(80.0, 10.0);
  BenchmarkEnv env(pb, 1, {x0});
  CHECK(env.observation_dim() == 2);
  CHECK(env.action_dim() == 2);
  const Eigen::VectorXd obs = env.reset_to(x0);
  CHECK(obs.isApprox(stage1_observation(*pb, x0)));
  int steps = 0;
  bool done = false;
  while (!done) {
    const StepOutput out = env.step(Eigen::Vector2d::Zero());
    const StepInfo& info = env.last_info();
    CHECK(out.reward == Approx(-pb->settings.c_h * std::max(0.0, -info.h0) - pb->settings.c_u * info.u.norm()));
    CHECK(info.alpha == Approx(0.5 * (0.1 + 10.0)));
    CHECK_FALSE(info.violation);
    CHECK(std::abs(info.u[0]) <= pb->model.input_set().radius() + 1e-12);
    done = out.done;
    ++steps;
  }
  CHECK(steps == pb->settings.steps());
  CHECK(env.time() == Approx(pb->settings.t_final));
  CHECK_THROWS(env.step(Eigen::Vector3d::Zero()));

  BenchmarkEnv env2(pb, 2, {x0});
  env2.reset_to(x0);
  CHECK_THROWS_AS(env2.step(Eigen::Vector3d::Zero()), std::logic_error);
  CHECK_THROWS(BenchmarkEnv(pb, 3, {x0}));
  CHECK_THROWS(BenchmarkEnv(pb, 1, {}));
}

TEST_CASE("stage dispatch", "[env]") {
  const auto pb = cruise_problem();
  CHECK(dispatch(pb.chain, Eigen::Vector2d(120.0, 5.0)) == Stage::kOne);
  CHECK(dispatch(pb.chain, Eigen::Vector2d(10.0, 20.0)) == Stage::kUnsafe);
  // A start tagged E by the grid split lies in S but not in C*.
  for (const auto& p : pb.grid.points) {
    if (p.tag == SetTag::kE) CHECK(dispatch(pb.chain, p.x) == Stage::kTwo);
  }
}

TEST_CASE("PPO presets", "[env]") {
  const PpoConfig c1 = ppo_preset("cruise", 1);
  CHECK(c1.learning_rate == 1e-3);
  CHECK(c1.batch_size == 64);
  CHECK(c1.gamma == 0.95);
  CHECK(c1.n_envs == 8);
  const PpoConfig d2 = ppo_preset("docking", 2);
  CHECK(d2.rollout_steps == 2560);
  CHECK(d2.schedule == LrSchedule::kLinearDecay);
  CHECK(d2.gamma == 0.999);
  CHECK_THROWS(ppo_preset("orbit", 1));
  CHECK_THROWS(ppo_preset("cruise", 3));
}

TEST_CASE("inspection action decoding", "[env][inspection]") {
  const InspectionSettings s = inspection_settings();
  const InspectionParams p;
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(8);
  InspectionAction a = decode_inspection_action(s, 1, raw);
  CHECK(a.alpha1 == Approx(5.05));
  CHECK(a.eta_b == 0.0);
  CHECK(a.u_hat.norm() == 0.0);
  CHECK(a.lambda == Approx(0.5));
  raw << 0.3, -40.0, 40.0, -40.0, 3.0, 0.0, 4.0, 40.0;
  a = decode_inspection_action(s, 2, raw);
  CHECK(a.head == 0.3);
  CHECK(a.alpha1 == Approx(0.1));
  CHECK(a.alpha2 == a.alpha1);
  CHECK(a.u_hat.isApprox(Eigen::Vector3d(0.6, 0.0, 0.8)));
  CHECK(a.lambda == Approx(1.0));
  CHECK(burn_duration(p, a.eta_b) == Approx(90.0));
  CHECK(burn_duration(p, -1.0) == Approx(3.0));
  CHECK(coast_duration(p, a.eta_c) == Approx(3600.0));
  CHECK(coast_duration(p, 1.0) == Approx(3.0 * 3600.0));
  CHECK_THROWS(decode_inspection_action(s, 1, Eigen::VectorXd::Zero(7)));
}

TEST_CASE("inspection step", "[env][inspection]") {
  auto ip = std::make_shared<const InspectionProblem>(inspection_problem());
  const Eigen::VectorXd x0 = ip->grid.points.front().x;

  SECTION("total thrust stays on the ball") {
    InspectionAction a = inspection_baseline_action(ip->settings);
    a.lambda = 1.0;
    a.u_hat = Eigen::Vector3d(1.0, 1.0, 0.0).normalized();
    const InspectionCommand c = inspection_command(*ip, 1, a, x0, nullptr);
    CHECK(c.u.norm() <= ip->params.u_max * (1.0 + 1e-12));
    CHECK(c.u_rl.norm() == Approx(ip->params.u_max));
  }

  SECTION("arc is clipped at the mission end") {
    const InspectionAction a = inspection_baseline_action(ip->settings);
    const double t = ip->params.mission_time - 100.0;
    const InspectionStepInfo info = inspection_advance(*ip, 1, a, x0, t, nullptr);
    CHECK(info.burn + info.coast == Approx(100.0));
    CHECK(info.fuel == Approx(info.u.norm() * info.burn));
  }

  SECTION("arc sampling") {
    const InspectionArc arc = propagate_arc(*ip, x0, 0.0, Eigen::Vector3d::Zero(), 10.0, 150.0);
    CHECK(arc.states.size() == 1 + 10 + 3);
    CHECK(arc.times.back() == Approx(160.0));
  }

  SECTION("reward sign") {
    InspectionSettings s = ip->settings;
    CHECK(inspection_reward(s, 0.2, 0.3, 5.0) == Approx(0.5));
    CHECK(inspection_reward(s, -0.2, 0.3, 0.0) == Approx(-0.2));
    s.literal_metric_sign = true;
    CHECK(inspection_reward(s, 0.2, 0.3, 5.0) == Approx(-0.5));
  }

  SECTION("episode runs to the mission time") {
    InspectionEnv env(ip, 1, {x0});
    env.reset_to(x0);
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(8);
    raw[7] = -40.0;  // no enhancement thrust
    int n = 0;
    double total_score = 0.0;
    for (bool done = false; !done; ++n) {
      const StepOutput out = env.step(raw);
      CHECK_FALSE(env.last_info().violation);
      total_score += env.last_info().score;
      done = out.done;
    }
    CHECK(env.time() == Approx(ip->params.mission_time));
    CHECK(n == 24);  // 48 h of 2 h coasts plus 46.5 s burns, clipped
    CHECK(total_score > 0.0);
  }

  SECTION("combined barrier and its observation") {
    CHECK(ip->combined(x0) == Approx(0.5));
    CHECK(ip->stage2_obs.dim == 12);
    const Eigen::VectorXd s = inspection_stage2_observation(*ip, x0);
    CHECK(s.tail(6).norm() == 0.0);
    CHECK(ip->hbar0 > 0.0);
  }
}
