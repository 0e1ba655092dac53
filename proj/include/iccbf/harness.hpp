#pragma once

// Controller strategies, Monte-Carlo episode runs, summary statistics and the
// on-disk outputs of a run (manifest.json, episodes.csv, stats.csv,
// trajectories/<id>.csv).

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "iccbf/config.hpp"
#include "iccbf/env.hpp"
#include "iccbf/inspection_env.hpp"
#include "iccbf/ppo.hpp"
#include "iccbf/scenarios.hpp"

#ifndef ICCBF_VERSION
#define ICCBF_VERSION "0.1.0"
#endif

namespace iccbf {

enum class StrategyId { kIccbf, kStage1, kStage1_2, kInspectionBaseline, kInspectionRl };

inline std::string to_string(StrategyId s) {
  switch (s) {
    case StrategyId::kIccbf: return "iccbf";
    case StrategyId::kStage1: return "stage1";
    case StrategyId::kStage1_2: return "stage1_2";
    case StrategyId::kInspectionBaseline: return "inspection_baseline";
    case StrategyId::kInspectionRl: return "inspection_rl";
  }
  return "?";
}

inline StrategyId parse_strategy(const std::string& s) {
  for (auto id : {StrategyId::kIccbf, StrategyId::kStage1, StrategyId::kStage1_2, StrategyId::kInspectionBaseline,
                  StrategyId::kInspectionRl}) {
    if (to_string(id) == s) return id;
  }
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline bool is_inspection(StrategyId s) {
  return s == StrategyId::kInspectionBaseline || s == StrategyId::kInspectionRl;
}

/// Policies are deterministic at run time (the Gaussian mean). A missing
/// Stage-1 policy means the fixed baseline gains.
struct Strategy {
  StrategyId id = StrategyId::kIccbf;
  std::shared_ptr<const GaussianPolicy> stage1;
  std::shared_ptr<const GaussianPolicy> stage2;
  std::string stage1_source = "none";
  std::string stage2_source = "none";
};

/// Zero weights and constant outputs: barrier head tanh^{-1}(head), every
/// other raw action 0 (mid-range gains; for inspection also eta = 0 and no
/// enhancement thrust since u_hat = 0).
inline GaussianPolicy fallback_stage2_policy(int obs_dim, int act_dim, double head = 0.05) {
  Mlp net(default_layer_sizes(obs_dim, act_dim));
  net.bias(net.num_layers() - 1)[0] = std::atanh(head);
  return GaussianPolicy(std::move(net), Eigen::VectorXd::Constant(act_dim, std::log(0.2)));
}

inline std::shared_ptr<const GaussianPolicy> load_policy(const std::filesystem::path& path, int obs_dim, int act_dim) {
  ActorCritic ac = load_checkpoint(path);
  if (ac.policy.observation_dim() != obs_dim || ac.policy.action_dim() != act_dim) {
    throw std::runtime_error("checkpoint " + path.string() + " does not match the environment dimensions");
  }
  return std::make_shared<const GaussianPolicy>(ac.policy);
}

/// Loads checkpoints for a benchmark strategy (empty path: none). stage1_2
/// without a Stage-2 checkpoint uses the fallback policy.
inline Strategy make_benchmark_strategy(StrategyId id, const BenchmarkProblem& pb,
                                        const std::filesystem::path& stage1_ckpt = {},
                                        const std::filesystem::path& stage2_ckpt = {}) {
  if (is_inspection(id)) throw std::invalid_argument("inspection strategy used for a benchmark scenario");
  Strategy s;
  s.id = id;
  if (id == StrategyId::kIccbf) return s;
  if (!stage1_ckpt.empty()) {
    s.stage1 = load_policy(stage1_ckpt, pb.state_dim(), 2);
    s.stage1_source = stage1_ckpt.string();
  } else if (id == StrategyId::kStage1) {
    throw std::invalid_argument("stage1 strategy needs a Stage-1 checkpoint");
  }
  if (id == StrategyId::kStage1_2) {
    if (!stage2_ckpt.empty()) {
      s.stage2 = load_policy(stage2_ckpt, pb.stage2_obs.dim, 3);
      s.stage2_source = stage2_ckpt.string();
    } else {
      s.stage2 = std::make_shared<const GaussianPolicy>(fallback_stage2_policy(pb.stage2_obs.dim, 3));
      s.stage2_source = "fallback";
    }
  }
  return s;
}

inline Strategy make_inspection_strategy(StrategyId id, const InspectionProblem& ip,
                                         const std::filesystem::path& stage1_ckpt = {},
                                         const std::filesystem::path& stage2_ckpt = {}) {
  if (!is_inspection(id)) throw std::invalid_argument("benchmark strategy used for the inspection scenario");
  Strategy s;
  s.id = id;
  if (id == StrategyId::kInspectionBaseline) return s;
  if (!stage1_ckpt.empty()) {
    s.stage1 = load_policy(stage1_ckpt, ip.state_dim(), kInspectionActionDim);
    s.stage1_source = stage1_ckpt.string();
  }
  if (!stage2_ckpt.empty()) {
    s.stage2 = load_policy(stage2_ckpt, ip.stage2_obs.dim, kInspectionActionDim);
    s.stage2_source = stage2_ckpt.string();
  } else {
    s.stage2 = std::make_shared<const GaussianPolicy>(fallback_stage2_policy(ip.stage2_obs.dim, kInspectionActionDim));
    s.stage2_source = "fallback";
  }
  return s;
}

struct EpisodeRecord {
  int id = 0;
  SetTag tag = SetTag::kD;
  std::vector<double> times;               // times[k] is the time of states[k]
  std::vector<Eigen::VectorXd> states;     // size steps + 1
  std::vector<Eigen::VectorXd> controls;   // size steps
  std::vector<double> h0;                  // h0 at states[k+1]; inspection: min of both zones over the arc
  std::vector<int> stages;
  std::vector<SolveStatus> statuses;
  std::vector<int> iterations;
  std::vector<double> solve_seconds;
  std::vector<double> alpha, beta, head;
  std::vector<double> score;               // inspection: cumulative metric at states[k+1]
  double fuel = 0.0;
  bool success = true;
  bool docked = false;
  double inspection_score = 0.0;
  double h0_initial = 0.0;
  double min_h0 = 0.0;
  int nonoptimal = 0;
  int rescaled = 0;                        // inspection: burns rescaled onto the ball

  int steps() const { return static_cast<int>(controls.size()); }
};

inline EpisodeRecord run_benchmark_episode(const BenchmarkProblem& pb, const Strategy& s, const Eigen::VectorXd& x0,
                                           SetTag tag = SetTag::kD, int id = 0) {
  if (is_inspection(s.id)) throw std::invalid_argument("inspection strategy used for a benchmark scenario");
  EpisodeRecord rec;
  rec.id = id;
  rec.tag = tag;
  BoundedActionMap margins({{pb.settings.alpha_min, pb.settings.alpha_max}, {pb.settings.beta_min, pb.settings.beta_max}});
  Eigen::VectorXd x = x0;
  rec.times.push_back(0.0);
  rec.states.push_back(x);
  rec.h0_initial = rec.min_h0 = pb.h0()(x);
  for (int k = 0; k < pb.settings.steps(); ++k) {
    Stage stage = Stage::kOne;
    if (s.id == StrategyId::kStage1_2) stage = dispatch(pb.chain, x);
    double a = pb.settings.baseline_alpha, b = pb.settings.baseline_beta, head = 0.0;
    FilterResult fr;
    if (stage == Stage::kOne) {
      if (s.stage1) {
        const Eigen::VectorXd ab = margins.decode(s.stage1->mean(stage1_observation(pb, x)));
        a = ab[0];
        b = ab[1];
      }
      fr = stage1_control(pb, x, a, b);
    } else {
      // Outside S the residual controller keeps trying to recover.
      const Eigen::VectorXd raw = s.stage2->mean(stage2_observation(pb, x));
      const Eigen::VectorXd ab = margins.decode(raw.tail(2));
      a = ab[0];
      b = ab[1];
      head = std::tanh(raw[0]);
      fr = stage2_control(pb, *s.stage2, x, raw[0], a, b);
    }
    const StepInfo info = advance(pb, x, fr, stage);
    x = info.x_next;
    rec.times.push_back((k + 1) * pb.settings.dt);
    rec.states.push_back(x);
    rec.controls.push_back(info.u);
    rec.h0.push_back(info.h0);
    rec.stages.push_back(static_cast<int>(stage));
    rec.statuses.push_back(info.status);
    rec.iterations.push_back(info.iterations);
    rec.solve_seconds.push_back(info.solve_seconds);
    rec.alpha.push_back(a);
    rec.beta.push_back(b);
    rec.head.push_back(head);
    rec.fuel += info.u.norm() * pb.settings.dt;
    rec.min_h0 = std::min(rec.min_h0, info.h0);
    if (info.violation) rec.success = false;
    if (info.status != SolveStatus::kOptimal) ++rec.nonoptimal;
    if (info.docked) {
      rec.docked = true;
      break;
    }
  }
  return rec;
}

inline EpisodeRecord run_inspection_episode(const InspectionProblem& ip, const Strategy& s, const Eigen::VectorXd& x0,
                                            SetTag tag = SetTag::kD, int id = 0) {
  if (!is_inspection(s.id)) throw std::invalid_argument("benchmark strategy used for the inspection scenario");
  EpisodeRecord rec;
  rec.id = id;
  rec.tag = tag;
  Eigen::VectorXd x = x0;
  double t = 0.0;
  rec.times.push_back(t);
  rec.states.push_back(x);
  rec.h0_initial = rec.min_h0 = std::min(ip.koz.h0()(x), ip.kiz.h0()(x));
  while (t < ip.params.mission_time - 1e-9) {
    int stage = 1;
    InspectionAction a = inspection_baseline_action(ip.settings);
    if (s.id == StrategyId::kInspectionRl) {
      if (inspection_dispatch(ip, x) == Stage::kOne) {
        if (s.stage1) a = decode_inspection_action(ip.settings, 1, s.stage1->mean(inspection_stage1_observation(ip, x)));
      } else {
        stage = 2;
        a = decode_inspection_action(ip.settings, 2, s.stage2->mean(inspection_stage2_observation(ip, x)));
      }
    }
    const InspectionStepInfo info = inspection_advance(ip, stage, a, x, t, s.stage2.get());
    x = info.x_next;
    t += info.burn + info.coast;
    rec.times.push_back(t);
    rec.states.push_back(x);
    rec.controls.push_back(info.u);
    rec.h0.push_back(std::min(info.min_h_koz, info.min_h_kiz));
    rec.stages.push_back(stage);
    rec.statuses.push_back(info.status);
    rec.iterations.push_back(info.iterations);
    rec.solve_seconds.push_back(info.solve_seconds);
    rec.alpha.push_back(a.alpha1);
    rec.beta.push_back(a.alpha2);
    rec.head.push_back(stage == 2 ? std::tanh(a.head) : 0.0);
    rec.inspection_score += info.score;
    rec.score.push_back(rec.inspection_score);
    rec.fuel += info.fuel;
    rec.min_h0 = std::min(rec.min_h0, rec.h0.back());
    if (info.violation) rec.success = false;
    if (info.status != SolveStatus::kOptimal) ++rec.nonoptimal;
    if (info.rescaled) ++rec.rescaled;
  }
  return rec;
}

/// Runs `episode(i)` for i in [0, n) on `threads` workers; results keep index
/// order.
template <class Fn>
std::vector<EpisodeRecord> run_parallel(int n, int threads, Fn episode) {
  std::vector<EpisodeRecord> out(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = episode(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

/// One episode per D- or E-tagged grid point (unsafe starts are skipped).
inline std::vector<EpisodeRecord> run_benchmark(const BenchmarkProblem& pb, const Strategy& s, int threads = 1) {
  std::vector<const InitialState*> starts;
  for (const auto& p : pb.grid.points) {
    if (p.tag != SetTag::kUnsafe) starts.push_back(&p);
  }
  return run_parallel(static_cast<int>(starts.size()), threads, [&](int i) {
    const InitialState& p = *starts[static_cast<std::size_t>(i)];
    return run_benchmark_episode(pb, s, p.x, p.tag, i);
  });
}

inline std::vector<EpisodeRecord> run_inspection(const InspectionProblem& ip, const Strategy& s, int threads = 1) {
  return run_parallel(static_cast<int>(ip.grid.size()), threads, [&](int i) {
    const InitialState& p = ip.grid.points[static_cast<std::size_t>(i)];
    return run_inspection_episode(ip, s, p.x, p.tag, i);
  });
}

/// Linear interpolation between closest ranks (type 7). `sorted` ascending.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct SummaryStats {
  int count = 0;
  int successes = 0;
  double success_pct = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double q1 = 0.0, q2 = 0.0, q3 = 0.0, p99 = 0.0;
};

inline SummaryStats summarize(std::vector<double> values, const std::vector<bool>& success) {
  if (values.size() != success.size()) throw std::invalid_argument("values and success flags differ in length");
  SummaryStats s;
  s.count = static_cast<int>(values.size());
  s.successes = static_cast<int>(std::count(success.begin(), success.end(), true));
  if (s.count == 0) return s;
  s.success_pct = 100.0 * s.successes / s.count;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.count;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  s.q1 = quantile(values, 0.25);
  s.q2 = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  s.p99 = quantile(values, 0.99);
  return s;
}

/// Which set of episodes a stats row covers.
enum class StatsSet { kAll, kD, kE };

inline std::string to_string(StatsSet s) {
  switch (s) {
    case StatsSet::kAll: return "all";
    case StatsSet::kD: return "D";
    case StatsSet::kE: return "E";
  }
  return "?";
}

/// Fuel for the benchmarks, the inspection metric for inspection runs.
inline SummaryStats stats(const std::vector<EpisodeRecord>& recs, bool inspection, StatsSet set = StatsSet::kAll) {
  std::vector<double> v;
  std::vector<bool> ok;
  for (const auto& r : recs) {
    if (set == StatsSet::kD && r.tag != SetTag::kD) continue;
    if (set == StatsSet::kE && r.tag != SetTag::kE) continue;
    v.push_back(inspection ? r.inspection_score : r.fuel);
    ok.push_back(r.success);
  }
  return summarize(std::move(v), ok);
}

namespace detail {
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

/// Header of stats.csv.
inline constexpr const char* kStatsColumns =
    "scenario,strategy,set,count,successes,success_pct,mean,std,q1,q2,q3,p99,median_change_pct";

/// One stats.csv row per set. `baseline_median` (same set order) fills the
/// median-change column; NaN leaves it empty.
inline std::string stats_csv(const std::string& scenario, const std::string& strategy,
                             const std::vector<EpisodeRecord>& recs, bool inspection,
                             const std::vector<double>& baseline_median = {}) {
  std::string out = std::string(kStatsColumns) + "\n";
  const std::vector<StatsSet> sets =
      inspection ? std::vector<StatsSet>{StatsSet::kAll} : std::vector<StatsSet>{StatsSet::kAll, StatsSet::kD, StatsSet::kE};
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const SummaryStats s = stats(recs, inspection, sets[i]);
    out += scenario + "," + strategy + "," + to_string(sets[i]) + "," + std::to_string(s.count) + "," +
           std::to_string(s.successes) + "," + detail::num(s.success_pct) + "," + detail::num(s.mean) + "," +
           detail::num(s.std) + "," + detail::num(s.q1) + "," + detail::num(s.q2) + "," + detail::num(s.q3) + "," +
           detail::num(s.p99) + ",";
    if (i < baseline_median.size() && std::isfinite(baseline_median[i]) && baseline_median[i] != 0.0) {
      out += detail::num(100.0 * (s.q2 - baseline_median[i]) / baseline_median[i]);
    }
    out += "\n";
  }
  return out;
}

inline constexpr const char* kEpisodeColumns =
    "id,tag,steps,fuel,success,min_h0,docked,inspection_score,nonoptimal_solves,rescaled_burns";

inline std::string episodes_csv(const std::vector<EpisodeRecord>& recs) {
  std::string out = std::string(kEpisodeColumns);
  if (!recs.empty()) {
    for (Eigen::Index i = 0; i < recs.front().states.front().size(); ++i) out += ",x0_" + std::to_string(i);
  }
  out += "\n";
  for (const auto& r : recs) {
    out += std::to_string(r.id) + "," + to_string(r.tag) + "," + std::to_string(r.steps()) + "," + detail::num(r.fuel) +
           "," + (r.success ? "1" : "0") + "," + detail::num(r.min_h0) + "," + (r.docked ? "1" : "0") + "," +
           detail::num(r.inspection_score) + "," + std::to_string(r.nonoptimal) + "," + std::to_string(r.rescaled);
    for (Eigen::Index i = 0; i < r.states.front().size(); ++i) out += "," + detail::num(r.states.front()[i]);
    out += "\n";
  }
  return out;
}

/// Columns: step, t, state..., h0, then the step that starts at this row:
/// u..., stage, status, iterations, solve_us, alpha, beta, head, score. h0
/// is the value at the row's state (inspection: minimum over the arc that
/// ends there); the last row has no step.
inline std::string trajectory_csv(const EpisodeRecord& r) {
  const Eigen::Index n = r.states.front().size();
  const Eigen::Index m = r.controls.empty() ? 0 : r.controls.front().size();
  std::string out = "step,t";
  for (Eigen::Index i = 0; i < n; ++i) out += ",x" + std::to_string(i);
  out += ",h0";
  for (Eigen::Index j = 0; j < m; ++j) out += ",u" + std::to_string(j);
  out += ",stage,status,iterations,solve_us,alpha,beta,head,score\n";
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    out += std::to_string(k) + "," + detail::num(r.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) out += "," + detail::num(r.states[k][i]);
    out += "," + detail::num(k == 0 ? r.h0_initial : r.h0[k - 1]);
    if (k < r.controls.size()) {
      for (Eigen::Index j = 0; j < m; ++j) out += "," + detail::num(r.controls[k][j]);
      out += "," + std::to_string(r.stages[k]) + "," + to_string(r.statuses[k]) + "," +
             std::to_string(r.iterations[k]) + "," + detail::num(1e6 * r.solve_seconds[k]) + "," +
             detail::num(r.alpha[k]) + "," + detail::num(r.beta[k]) + "," + detail::num(r.head[k]) + "," +
             (k < r.score.size() ? detail::num(r.score[k]) : std::string());
    } else {
      for (Eigen::Index j = 0; j < m; ++j) out += ",";
      out += ",,,,,,,,";
    }
    out += "\n";
  }
  return out;
}

struct RunInfo {
  std::string scenario;
  Strategy strategy;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

/// Writes manifest.json, episodes.csv, stats.csv and trajectories/.
inline void write_run(const std::filesystem::path& dir, const RunInfo& info, const std::vector<EpisodeRecord>& recs,
                      const std::vector<double>& baseline_median = {}) {
  std::filesystem::create_directories(dir / "trajectories");
  const bool insp = is_inspection(info.strategy.id);
  nlohmann::ordered_json m;
  m["scenario"] = info.scenario;
  m["strategy"] = to_string(info.strategy.id);
  m["seed"] = info.seed;
  m["config_hash"] = info.config_hash;
  m["version"] = ICCBF_VERSION;
  m["episodes"] = recs.size();
  m["stage1_policy"] = info.strategy.stage1_source;
  m["stage2_policy"] = info.strategy.stage2_source;
  m["stats_columns"] = kStatsColumns;
  m["episode_columns"] = kEpisodeColumns;
  m["metric"] = insp ? "inspection_score" : "fuel_impulse";
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  write_text(dir / "episodes.csv", episodes_csv(recs));
  write_text(dir / "stats.csv", stats_csv(info.scenario, to_string(info.strategy.id), recs, insp, baseline_median));
  for (const auto& r : recs) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.csv", r.id);
    write_text(dir / "trajectories" / name, trajectory_csv(r));
  }
}

/// Episode-level assertions checked by --strict: finite fuel everywhere, and
/// for iccbf / stage1 every D start must stay safe.
inline int assertion_failures(const std::vector<EpisodeRecord>& recs, StrategyId id) {
  int n = 0;
  for (const auto& r : recs) {
    if (!std::isfinite(r.fuel)) ++n;
    else if ((id == StrategyId::kIccbf || id == StrategyId::kStage1) && r.tag == SetTag::kD && !r.success) ++n;
  }
  return n;
}

struct FeasibilityCell {
  Eigen::VectorXd x;
  bool in_S = false;
  bool in_Cstar = false;
  bool residual = false;  // in S but not in C*
};

inline std::vector<FeasibilityCell> feasibility_map(const std::vector<BarrierChain>& chains,
                                                    const std::vector<Eigen::VectorXd>& points) {
  std::vector<FeasibilityCell> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    const SetTag t = classify(chains, x);
    FeasibilityCell c;
    c.x = x;
    c.in_S = t != SetTag::kUnsafe;
    c.in_Cstar = t == SetTag::kD;
    c.residual = t == SetTag::kE;
    out.push_back(c);
  }
  return out;
}

/// d in [0, d_max] step dd, v in [0, v_max] step dv, d-major.
inline std::vector<Eigen::VectorXd> cruise_raster(double dd, double dv, double d_max = 120.0, double v_max = 24.0) {
  if (!(dd > 0.0 && dv > 0.0)) throw std::invalid_argument("raster steps must be positive");
  std::vector<Eigen::VectorXd> out;
  const int nd = static_cast<int>(std::floor(d_max / dd + 1e-9));
  const int nv = static_cast<int>(std::floor(v_max / dv + 1e-9));
  for (int i = 0; i <= nd; ++i) {
    for (int j = 0; j <= nv; ++j) out.push_back(Eigen::Vector2d(i * dd, j * dv));
  }
  return out;
}

inline std::string feasibility_csv(const std::vector<FeasibilityCell>& cells, const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) out += l + ",";
  out += "in_S,in_Cstar,residual\n";
  for (const auto& c : cells) {
    for (Eigen::Index i = 0; i < c.x.size(); ++i) out += detail::num(c.x[i]) + ",";
    out += std::string(c.in_S ? "1" : "0") + "," + (c.in_Cstar ? "1" : "0") + "," + (c.residual ? "1" : "0") + "\n";
  }
  return out;
}

/// Environment factories for training. Stage 1 starts from D, Stage 2 from E
/// (all safe starts when E is empty).
inline std::vector<Eigen::VectorXd> training_starts(const InitialGrid& grid, int stage) {
  std::vector<Eigen::VectorXd> s = grid.states(stage == 1 ? SetTag::kD : SetTag::kE);
  if (s.empty()) {
    for (const auto& p : grid.points) {
      if (p.tag != SetTag::kUnsafe) s.push_back(p.x);
    }
  }
  return s;
}

/// Raw action whose decoded gains are the baseline ones (Stage 2 adds the
/// fallback barrier head in front).
inline Eigen::VectorXd baseline_raw_action(const BenchmarkProblem& pb, int stage, double head = 0.05) {
  const BenchmarkSettings& st = pb.settings;
  const Eigen::Vector2d ab(unsquash(st.baseline_alpha, st.alpha_min, st.alpha_max),
                           unsquash(st.baseline_beta, st.beta_min, st.beta_max));
  if (stage == 1) return ab;
  Eigen::VectorXd raw(3);
  raw << std::atanh(head), ab;
  return raw;
}

/// Freshly initialised weights (same draw as `train`) with the output bias
/// moved so that the mean action starts at `raw`.
inline ActorCritic warm_start(int obs_dim, const Eigen::VectorXd& raw, const PpoConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ActorCritic ac = ActorCritic::create(obs_dim, static_cast<int>(raw.size()), rng, cfg.init_std, cfg.hidden_width,
                                       cfg.hidden_layers);
  Mlp& net = ac.policy.mean_net();
  net.bias(net.num_layers() - 1) += raw;
  return ac;
}

inline EnvFactory benchmark_env_factory(std::shared_ptr<const BenchmarkProblem> pb, int stage) {
  auto starts = training_starts(pb->grid, stage);
  return [pb, stage, starts]() -> std::unique_ptr<Environment> {
    return std::make_unique<BenchmarkEnv>(pb, stage, starts);
  };
}

inline EnvFactory inspection_env_factory(std::shared_ptr<const InspectionProblem> ip, int stage) {
  auto starts = training_starts(ip->grid, stage);
  return [ip, stage, starts]() -> std::unique_ptr<Environment> {
    return std::make_unique<InspectionEnv>(ip, stage, starts);
  };
}

}  // namespace iccbf
