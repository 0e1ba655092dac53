#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "iccbf/iccbf.hpp"

using Catch::Approx;
using namespace iccbf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("iccbf_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("type-7 quantiles", "[harness]") {
  const std::vector<double> v{1.0, 2.0, 4.0, 8.0, 16.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 16.0);
  CHECK(quantile(v, 0.5) == 4.0);
  // h = 4 * 0.3 = 1.2 between 2 and 4.
  CHECK(quantile(v, 0.3) == Approx(2.4));
  CHECK(quantile(v, 0.99) == Approx(8.0 + 0.96 * 8.0));
  CHECK_THROWS(quantile({}, 0.5));
  CHECK_THROWS(quantile(v, 1.5));

  const SummaryStats s = summarize({3.0, 1.0, 2.0, 6.0}, {true, false, true, true});
  CHECK(s.count == 4);
  CHECK(s.successes == 3);
  CHECK(s.success_pct == 75.0);
  CHECK(s.mean == 3.0);
  CHECK(s.std == Approx(std::sqrt(14.0 / 3.0)));
  CHECK(s.q1 == Approx(1.75));
  CHECK(s.q2 == Approx(2.5));
  CHECK(s.q3 == Approx(3.75));
}

TEST_CASE("stats rows", "[harness]") {
  std::vector<EpisodeRecord> recs(4);
  const double fuel[] = {10.0, 20.0, 30.0, 50.0};
  for (int i = 0; i < 4; ++i) {
    recs[i].id = i;
    recs[i].tag = i < 2 ? SetTag::kD : SetTag::kE;
    recs[i].fuel = fuel[i];
    recs[i].success = i != 3;
  }
  CHECK(stats(recs, false, StatsSet::kD).q2 == 15.0);
  CHECK(stats(recs, false, StatsSet::kE).successes == 1);
  const std::string csv = stats_csv("cruise", "stage1", recs, false, {25.0, 0.0});
  std::istringstream is(csv);
  std::string header, all, d, e;
  std::getline(is, header);
  std::getline(is, all);
  std::getline(is, d);
  std::getline(is, e);
  CHECK(header == kStatsColumns);
  CHECK(all.starts_with("cruise,stage1,all,4,3,75,27.5,"));
  CHECK(all.ends_with(",0"));  // median 25 against 25
  CHECK(d.ends_with(","));     // zero baseline leaves the column empty
  CHECK(e.ends_with(","));
}

TEST_CASE("configuration", "[harness][config]") {
  const Config def;
  CHECK(config_hash(def) == "6e185427f5448e12");
  std::istringstream round(to_ini(def));
  CHECK(config_hash(load_config(round)) == config_hash(def));

  std::istringstream units("[docking]\ncone_half_angle_deg = 30\n[inspection]\nmission_time_h = 2\n[run]\nseed = 9\n");
  const Config c = load_config(units);
  CHECK(c.docking.cone_half_angle == Approx(std::numbers::pi / 6));
  CHECK(c.inspection.mission_time == 7200.0);
  CHECK(c.seed == 9);
  CHECK(config_hash(c) != config_hash(def));

  std::istringstream bad_key("[cruise]\nmas = 1\n");
  CHECK_THROWS_AS(load_config(bad_key), ConfigError);
  std::istringstream bad_value("[cruise]\nmass = heavy\n");
  CHECK_THROWS_AS(load_config(bad_value), ConfigError);
  std::istringstream bad_bool("[docking]\nliteral_offset = maybe\n");
  CHECK_THROWS_AS(load_config(bad_bool), ConfigError);
}

TEST_CASE("fallback Stage-2 policy", "[harness]") {
  const GaussianPolicy pi = fallback_stage2_policy(10, 3);
  const Eigen::VectorXd m = pi.mean(Eigen::VectorXd::Random(10));
  CHECK(std::tanh(m[0]) == Approx(0.05));
  CHECK(m.tail(2).norm() == 0.0);
  CHECK(pi.log_std().isApprox(Eigen::VectorXd::Constant(3, std::log(0.2))));
}

TEST_CASE("strategies", "[harness]") {
  const auto pb = cruise_problem();
  CHECK(parse_strategy("stage1_2") == StrategyId::kStage1_2);
  CHECK_THROWS(parse_strategy("greedy"));
  CHECK_THROWS(make_benchmark_strategy(StrategyId::kStage1, pb));
  CHECK_THROWS(make_benchmark_strategy(StrategyId::kInspectionRl, pb));

  const fs::path dir = scratch("strategies");
  fs::create_directories(dir);
  std::mt19937_64 rng(1);
  save_checkpoint(dir / "s1.ckpt", ActorCritic::create(2, 2, rng));
  save_checkpoint(dir / "bad.ckpt", ActorCritic::create(3, 2, rng));
  const Strategy s = make_benchmark_strategy(StrategyId::kStage1_2, pb, dir / "s1.ckpt");
  CHECK(s.stage1 != nullptr);
  CHECK(s.stage2_source == "fallback");
  CHECK_THROWS(make_benchmark_strategy(StrategyId::kStage1, pb, dir / "bad.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("baseline runs are reproducible and write a full run directory", "[harness]") {
  const auto pb = docking_problem();
  const Strategy s = make_benchmark_strategy(StrategyId::kIccbf, pb);
  const auto a = run_benchmark(pb, s, 1);
  const auto b = run_benchmark(pb, s, 3);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == static_cast<int>(i));
    CHECK(a[i].fuel == b[i].fuel);
  }
  CHECK(assertion_failures(a, StrategyId::kIccbf) == 0);
  CHECK(stats(a, false, StatsSet::kD).success_pct == 100.0);

  const fs::path d1 = scratch("run1"), d2 = scratch("run2");
  RunInfo info{"docking", s, 1, config_hash(Config{})};
  write_run(d1, info, a);
  write_run(d2, info, b);
  CHECK(slurp(d1 / "stats.csv") == slurp(d2 / "stats.csv"));
  CHECK(slurp(d1 / "episodes.csv") == slurp(d2 / "episodes.csv"));
  CHECK(fs::exists(d1 / "trajectories" / "0099.csv"));
  const auto manifest = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  CHECK(manifest["strategy"] == "iccbf");
  CHECK(manifest["episodes"] == 100);

  std::istringstream traj(slurp(d1 / "trajectories" / "0000.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(traj, line)) ++rows;
  CHECK(rows == a[0].steps() + 1);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("feasibility map", "[harness]") {
  const auto pb = cruise_problem();
  const auto cells = feasibility_map({pb.chain}, pb.grid.all_states());
  int d = 0, e = 0, u = 0;
  for (const auto& c : cells) (c.in_Cstar ? d : c.residual ? e : u)++;
  CHECK(d == 254);
  CHECK(e == 5);
  CHECK(u == 66);
  CHECK(cruise_raster(10.0, 1.0).size() == 325);
  CHECK_THROWS(cruise_raster(0.0, 1.0));
  const std::string csv = feasibility_csv(cells, pb.grid.labels);
  CHECK(csv.starts_with("d,v,in_S,in_Cstar,residual\n0,0,"));
}

TEST_CASE("training start sets", "[harness]") {
  const auto pb = cruise_problem();
  CHECK(training_starts(pb.grid, 1).size() == 254);
  CHECK(training_starts(pb.grid, 2).size() == 5);
  const auto ip = inspection_problem();
  CHECK(training_starts(ip.grid, 2).size() == 100);
  auto env = benchmark_env_factory(std::make_shared<const BenchmarkProblem>(pb), 2)();
  CHECK(env->observation_dim() == pb.stage2_obs.dim);
}

TEST_CASE("warm start reproduces the baseline gains", "[harness]") {
  const auto pb = cruise_problem();
  const PpoConfig pc = ppo_preset("cruise", 1);
  const ActorCritic ac = warm_start(pb.state_dim(), baseline_raw_action(pb, 1), pc, 3);
  const BoundedActionMap gains({{pb.settings.alpha_min, pb.settings.alpha_max},
                                {pb.settings.beta_min, pb.settings.beta_max}});
  for (const auto& x : pb.grid.states(SetTag::kD)) {
    const Eigen::VectorXd ab = gains.decode(ac.policy.mean(stage1_observation(pb, x)));
    CHECK(ab[0] == Approx(pb.settings.baseline_alpha).epsilon(0.05));
    CHECK(ab[1] == Approx(pb.settings.baseline_beta).epsilon(0.05));
  }
  const Eigen::VectorXd raw2 = baseline_raw_action(pb, 2);
  REQUIRE(raw2.size() == 3);
  CHECK(std::tanh(raw2[0]) == Approx(0.05));
  CHECK(raw2.tail(2).isApprox(baseline_raw_action(pb, 1)));
}
