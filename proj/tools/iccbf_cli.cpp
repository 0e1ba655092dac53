// Command-line front end: train, eval, benchmark, inspect, feasibility-map,
// config.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "iccbf/iccbf.hpp"

namespace fs = std::filesystem;
using namespace iccbf;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out = "out";
  bool strict = false;
};

Config load(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : load_config(fs::path(c.config_path));
  if (c.seed_set) cfg.seed = c.seed;
  if (c.threads > 0) cfg.threads = c.threads;
  return cfg;
}

std::vector<double> medians(const std::vector<EpisodeRecord>& recs, bool inspection) {
  if (inspection) return {stats(recs, true).q2};
  return {stats(recs, false, StatsSet::kAll).q2, stats(recs, false, StatsSet::kD).q2,
          stats(recs, false, StatsSet::kE).q2};
}

void report(const std::vector<EpisodeRecord>& recs, bool inspection, const fs::path& out) {
  const SummaryStats s = stats(recs, inspection);
  std::printf("%d episodes, %d safe (%.1f%%), median %s %.6g, mean %.6g +- %.6g -> %s\n", s.count, s.successes,
              s.success_pct, inspection ? "score" : "fuel", s.q2, s.mean, s.std, out.string().c_str());
}

int finish(const Common& c, const std::vector<EpisodeRecord>& recs, StrategyId id) {
  const int bad = assertion_failures(recs, id);
  if (bad > 0) {
    std::fprintf(stderr, "%d episode assertion failure(s)\n", bad);
    if (c.strict) return 2;
  }
  return 0;
}

int run_strategy(const Common& c, const std::string& scenario, StrategyId id, const std::string& ckpt1,
                 const std::string& ckpt2) {
  const Config cfg = load(c);
  const fs::path out(c.out);
  RunInfo info;
  info.scenario = scenario;
  info.seed = cfg.seed;
  info.config_hash = config_hash(cfg);
  std::vector<EpisodeRecord> recs;
  std::vector<double> base;
  if (scenario == "inspection") {
    const InspectionProblem ip = inspection_problem(cfg);
    info.strategy = make_inspection_strategy(id, ip, ckpt1, ckpt2);
    recs = run_inspection(ip, info.strategy, cfg.threads);
    if (id != StrategyId::kInspectionBaseline) {
      base = medians(run_inspection(ip, make_inspection_strategy(StrategyId::kInspectionBaseline, ip), cfg.threads), true);
    }
  } else {
    const BenchmarkProblem pb = benchmark_problem(cfg, scenario);
    info.strategy = make_benchmark_strategy(id, pb, ckpt1, ckpt2);
    recs = run_benchmark(pb, info.strategy, cfg.threads);
    if (id != StrategyId::kIccbf) {
      base = medians(run_benchmark(pb, make_benchmark_strategy(StrategyId::kIccbf, pb), cfg.threads), false);
    }
  }
  write_run(out, info, recs, base);
  report(recs, is_inspection(id), out);
  return finish(c, recs, id);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "Random seed (overrides the config)");
  app->add_option("--threads", c.threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "Output directory");
  app->add_flag("--strict", c.strict, "Exit non-zero on any episode assertion failure");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-constrained control barrier functions with residual reinforcement learning"};
  app.require_subcommand(1);
  Common common;
  const std::vector<std::string> scenarios{"cruise", "docking", "inspection"};

  std::string scenario = "cruise", ckpt1, ckpt2, strategy = "iccbf", init;
  int stage = 1;
  long steps = 0;
  double dd = 0.0, dv = 0.0;

  auto* train_cmd = app.add_subcommand("train", "Train a Stage-1 or Stage-2 policy with PPO");
  add_common(train_cmd, common);
  train_cmd->add_option("--scenario", scenario)->check(CLI::IsMember(scenarios));
  train_cmd->add_option("--stage", stage)->check(CLI::IsMember({1, 2}));
  train_cmd->add_option("--steps", steps, "Total environment steps (overrides the config)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--init", init, "Checkpoint to resume from")->check(CLI::ExistingFile);
  bool cold = false;
  train_cmd->add_flag("--cold", cold, "Benchmarks: start from random weights instead of the baseline gains");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained checkpoint over the scenario starts");
  add_common(eval, common);
  eval->add_option("--scenario", scenario)->check(CLI::IsMember(scenarios));
  eval->add_option("--stage", stage)->check(CLI::IsMember({1, 2}));
  eval->add_option("--checkpoint", ckpt2, "Checkpoint of the evaluated stage")->required()->check(CLI::ExistingFile);
  eval->add_option("--stage1-checkpoint", ckpt1, "Stage-1 checkpoint used alongside a Stage-2 policy")
      ->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("benchmark", "Run a controller strategy on cruise or docking");
  add_common(bench, common);
  bench->add_option("--scenario", scenario)->check(CLI::IsMember({"cruise", "docking"}));
  bench->add_option("--strategy", strategy)->check(CLI::IsMember({"iccbf", "stage1", "stage1_2"}));
  bench->add_option("--stage1-checkpoint", ckpt1)->check(CLI::ExistingFile);
  bench->add_option("--stage2-checkpoint", ckpt2)->check(CLI::ExistingFile);

  auto* insp = app.add_subcommand("inspect", "Run the inspection mission");
  add_common(insp, common);
  std::string insp_strategy = "inspection_baseline";
  insp->add_option("--strategy", insp_strategy)->check(CLI::IsMember({"inspection_baseline", "inspection_rl"}));
  insp->add_option("--stage1-checkpoint", ckpt1)->check(CLI::ExistingFile);
  insp->add_option("--stage2-checkpoint", ckpt2)->check(CLI::ExistingFile);

  auto* fmap = app.add_subcommand("feasibility-map", "Tag states as C*, residual or unsafe");
  add_common(fmap, common);
  fmap->add_option("--scenario", scenario)->check(CLI::IsMember(scenarios));
  fmap->add_option("--dd", dd, "Cruise raster step in distance [m] (default: scenario grid)");
  fmap->add_option("--dv", dv, "Cruise raster step in speed [m/s]");

  auto* cfgcmd = app.add_subcommand("config", "Print the canonical configuration and its hash");
  add_common(cfgcmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      Config cfg = load(common);
      if (steps > 0) cfg.ppo.total_steps = steps;
      const PpoConfig pc = ppo_config(cfg, scenario, stage);
      TrainOptions opts;
      opts.out_dir = common.out;
      ActorCritic initial;
      EnvFactory factory;
      if (scenario == "inspection") {
        factory = inspection_env_factory(std::make_shared<const InspectionProblem>(inspection_problem(cfg)), stage);
      } else {
        const auto pb = std::make_shared<const BenchmarkProblem>(benchmark_problem(cfg, scenario));
        factory = benchmark_env_factory(pb, stage);
        if (init.empty() && !cold) {
          const int obs = stage == 1 ? pb->state_dim() : pb->stage2_obs.dim;
          initial = warm_start(obs, baseline_raw_action(*pb, stage), pc, cfg.seed);
          opts.initial = &initial;
        }
      }
      if (!init.empty()) {
        initial = load_checkpoint(init);
        opts.initial = &initial;
      }
      opts.on_rollout = [](const CurveRow& r) {
        std::printf("step %8ld  eval %12.5g  train %12.5g  kl %.3g\n", r.step, r.eval_reward, r.train_reward, r.approx_kl);
        std::fflush(stdout);
      };
      fs::create_directories(common.out);
      const TrainResult res = iccbf::train(factory, pc, cfg.seed, opts);
      std::printf("best eval reward %.6g at step %ld -> %s\n", res.best_eval_reward, res.best_step,
                  (fs::path(common.out) / "best.ckpt").string().c_str());
      return 0;
    }
    if (*eval) {
      if (scenario == "inspection") {
        return stage == 1 ? run_strategy(common, scenario, StrategyId::kInspectionRl, ckpt2, "")
                          : run_strategy(common, scenario, StrategyId::kInspectionRl, ckpt1, ckpt2);
      }
      return stage == 1 ? run_strategy(common, scenario, StrategyId::kStage1, ckpt2, "")
                        : run_strategy(common, scenario, StrategyId::kStage1_2, ckpt1, ckpt2);
    }
    if (*bench) return run_strategy(common, scenario, parse_strategy(strategy), ckpt1, ckpt2);
    if (*insp) return run_strategy(common, "inspection", parse_strategy(insp_strategy), ckpt1, ckpt2);
    if (*fmap) {
      const Config cfg = load(common);
      std::vector<BarrierChain> chains;
      std::vector<Eigen::VectorXd> points;
      std::vector<std::string> labels;
      if (scenario == "inspection") {
        const InspectionProblem ip = inspection_problem(cfg);
        chains = {ip.koz, ip.kiz};
        points = ip.grid.all_states();
        labels = ip.grid.labels;
      } else {
        const BenchmarkProblem pb = benchmark_problem(cfg, scenario);
        chains = {pb.chain};
        labels = pb.grid.labels;
        if (scenario == "cruise" && dd > 0.0 && dv > 0.0) {
          points = cruise_raster(dd, dv, 120.0, cfg.cruise.v_max);
        } else {
          points = pb.grid.all_states();
        }
      }
      const auto cells = feasibility_map(chains, points);
      fs::create_directories(common.out);
      const fs::path path = fs::path(common.out) / ("feasibility_" + scenario + ".csv");
      write_text(path, feasibility_csv(cells, labels));
      int d = 0, e = 0, u = 0;
      for (const auto& c : cells) (c.in_Cstar ? d : c.residual ? e : u)++;
      std::printf("%zu states: %d in C*, %d residual, %d unsafe -> %s\n", cells.size(), d, e, u, path.string().c_str());
      return 0;
    }
    if (*cfgcmd) {
      const Config cfg = load(common);
      std::cout << to_ini(cfg) << "; hash " << config_hash(cfg) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
