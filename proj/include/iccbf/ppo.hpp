#pragma once

// Proximal policy optimization: diagonal Gaussian policy over raw actions,
// separate value network, GAE, clipped surrogate with Adam.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "iccbf/mlp.hpp"

namespace iccbf {

class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, Eigen::VectorXd log_std) : mean_net_(std::move(mean_net)), log_std_(std::move(log_std)) {
    if (log_std_.size() != mean_net_.output_dim()) throw std::invalid_argument("one log-std per action");
  }

  static GaussianPolicy create(int obs_dim, int act_dim, std::mt19937_64& rng, double init_std = 0.2,
                               int width = 64, int depth = 4) {
    return GaussianPolicy(Mlp::orthogonal(default_layer_sizes(obs_dim, act_dim, width, depth), rng, 0.01),
                          Eigen::VectorXd::Constant(act_dim, std::log(init_std)));
  }

  int observation_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return mean_net_.output_dim(); }
  const Mlp& mean_net() const { return mean_net_; }
  Mlp& mean_net() { return mean_net_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::VectorXd& log_std() { return log_std_; }

  Eigen::VectorXd mean(const Eigen::VectorXd& obs) const { return mean_net_.forward(obs); }

  double log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean) const {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < action.size(); ++i) {
      const double z = (action[i] - mean[i]) * std::exp(-log_std_[i]);
      lp += -0.5 * z * z - log_std_[i] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
  }

  double entropy() const {
    return log_std_.sum() + 0.5 * static_cast<double>(log_std_.size()) * std::log(2.0 * std::numbers::pi * std::numbers::e);
  }

  struct Sample {
    Eigen::VectorXd action;
    double log_prob = 0.0;
  };

  Sample act(const Eigen::VectorXd& obs, std::mt19937_64& rng, bool deterministic) const {
    const Eigen::VectorXd mu = mean(obs);
    Sample s;
    s.action = mu;
    if (!deterministic) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < mu.size(); ++i) s.action[i] += std::exp(log_std_[i]) * normal(rng);
    }
    s.log_prob = log_prob(s.action, mu);
    return s;
  }

 private:
  Mlp mean_net_;
  Eigen::VectorXd log_std_;
};

/// Policy plus value network; the unit that is trained and checkpointed.
struct ActorCritic {
  GaussianPolicy policy;
  Mlp value_net;

  static ActorCritic create(int obs_dim, int act_dim, std::mt19937_64& rng, double init_std = 0.2, int width = 64,
                            int depth = 4) {
    ActorCritic ac;
    ac.policy = GaussianPolicy::create(obs_dim, act_dim, rng, init_std, width, depth);
    ac.value_net = Mlp::orthogonal(default_layer_sizes(obs_dim, 1, width, depth), rng, 1.0);
    return ac;
  }

  Eigen::VectorXd flat_parameters() const {
    const Eigen::VectorXd a = policy.mean_net().parameters();
    const Eigen::VectorXd b = value_net.parameters();
    Eigen::VectorXd out(a.size() + policy.log_std().size() + b.size());
    out << a, policy.log_std(), b;
    return out;
  }

  void set_flat_parameters(const Eigen::VectorXd& theta) {
    const Eigen::Index na = policy.mean_net().num_parameters();
    const Eigen::Index ns = policy.log_std().size();
    policy.mean_net().set_parameters(theta.head(na));
    policy.log_std() = theta.segment(na, ns);
    value_net.set_parameters(theta.tail(theta.size() - na - ns));
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "actor_critic 1\n" << policy.mean_net().to_text() << "log_std " << policy.log_std().size() << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < policy.log_std().size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", policy.log_std()[i]);
      os << buf << '\n';
    }
    os << value_net.to_text();
    return os.str();
  }

  static ActorCritic from_text(std::istream& is) {
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "actor_critic" || version != 1) throw std::runtime_error("not a checkpoint");
    Mlp mean_net = Mlp::from_text(is);
    Eigen::Index n = 0;
    if (!(is >> tag >> n) || tag != "log_std") throw std::runtime_error("checkpoint lacks log_std");
    Eigen::VectorXd ls(n);
    std::string tok;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(is >> tok)) throw std::runtime_error("truncated checkpoint");
      ls[i] = std::strtod(tok.c_str(), nullptr);
    }
    ActorCritic ac;
    ac.policy = GaussianPolicy(std::move(mean_net), ls);
    ac.value_net = Mlp::from_text(is);
    return ac;
  }
};

inline void save_checkpoint(const std::filesystem::path& path, const ActorCritic& ac) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os << ac.to_text();
}

inline ActorCritic load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  return ActorCritic::from_text(is);
}

struct StepOutput {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment acting on raw (unsquashed) actions.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Eigen::VectorXd reset(std::mt19937_64& rng) = 0;
  virtual StepOutput step(const Eigen::VectorXd& raw_action) = 0;
  /// Read-only copy of the acting policy, for environments that query it.
  virtual void set_policy_snapshot(std::shared_ptr<const GaussianPolicy> /*snapshot*/) {}
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// One-step bandit: reward -(a - target)^2 on a constant observation.
class ToyBanditEnv : public Environment {
 public:
  explicit ToyBanditEnv(double target = 0.5) : target_(target) {}
  int observation_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  Eigen::VectorXd reset(std::mt19937_64& /*rng*/) override { return Eigen::VectorXd::Zero(1); }
  StepOutput step(const Eigen::VectorXd& a) override {
    const double e = a[0] - target_;
    return {Eigen::VectorXd::Zero(1), -e * e, true};
  }

 private:
  double target_;
};

enum class LrSchedule { kConstant, kLinearDecay };

struct PpoConfig {
  double learning_rate = 1e-3;
  LrSchedule schedule = LrSchedule::kConstant;
  int batch_size = 64;
  int rollout_steps = 1280;  // per environment
  int epochs = 10;
  double gamma = 0.95;
  double gae_lambda = 0.99;
  double clip_range = 0.2;
  double entropy_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
  long total_steps = 50000;
  int n_envs = 8;
  int eval_episodes = 10;
  double init_std = 0.2;
  int hidden_width = 64;
  int hidden_layers = 4;

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(what);
    };
    req(learning_rate > 0.0, "learning rate must be positive");
    req(batch_size >= 1 && rollout_steps >= 1 && epochs >= 1, "batch, rollout and epochs must be >= 1");
    req(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    req(gae_lambda > 0.0 && gae_lambda <= 1.0, "gae lambda must lie in (0, 1]");
    req(clip_range > 0.0 && clip_range < 1.0, "clip range must lie in (0, 1)");
    req(entropy_coef >= 0.0 && vf_coef >= 0.0 && max_grad_norm > 0.0, "loss coefficients out of range");
    req(total_steps >= 1 && n_envs >= 1 && eval_episodes >= 0, "step and episode counts out of range");
    req(init_std > 0.0, "initial std must be positive");
  }

  double lr_at(long steps_done) const {
    if (schedule == LrSchedule::kConstant) return learning_rate;
    const double frac = 1.0 - static_cast<double>(steps_done) / static_cast<double>(total_steps);
    return learning_rate * std::max(frac, 0.0);
  }
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = b1_ * m_ + (1.0 - b1_) * grad;
    v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  Eigen::VectorXd m_, v_;
  double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
};

/// Transitions stored step-major: index t * n_envs + e.
struct RolloutBuffer {
  int n_steps = 0;
  int n_envs = 0;
  Eigen::MatrixXd observations;  // obs_dim x N
  Eigen::MatrixXd actions;       // act_dim x N
  Eigen::VectorXd log_probs, rewards, values, dones, advantages, returns;
  Eigen::VectorXd last_values;   // V of the observation after the last step, per env

  RolloutBuffer() = default;
  RolloutBuffer(int steps, int envs, int obs_dim, int act_dim) : n_steps(steps), n_envs(envs) {
    const Eigen::Index n = static_cast<Eigen::Index>(steps) * envs;
    observations = Eigen::MatrixXd::Zero(obs_dim, n);
    actions = Eigen::MatrixXd::Zero(act_dim, n);
    log_probs = rewards = values = dones = advantages = returns = Eigen::VectorXd::Zero(n);
    last_values = Eigen::VectorXd::Zero(envs);
  }

  Eigen::Index size() const { return rewards.size(); }
  Eigen::Index index(int t, int e) const { return static_cast<Eigen::Index>(t) * n_envs + e; }
};

/// GAE for one environment's trajectory slice. dones[t] = episode ended
/// after step t; values[t] = V(s_t); last_value = V(s_T).
inline Eigen::VectorXd gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                                      const Eigen::VectorXd& dones, double last_value, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  Eigen::VectorXd adv(n);
  double next_adv = 0.0;
  double next_value = last_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    adv[t] = next_adv;
    next_value = values[t];
  }
  return adv;
}

inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  for (int e = 0; e < buf.n_envs; ++e) {
    Eigen::VectorXd r(buf.n_steps), v(buf.n_steps), d(buf.n_steps);
    for (int t = 0; t < buf.n_steps; ++t) {
      r[t] = buf.rewards[buf.index(t, e)];
      v[t] = buf.values[buf.index(t, e)];
      d[t] = buf.dones[buf.index(t, e)];
    }
    const Eigen::VectorXd a = gae_advantages(r, v, d, buf.last_values[e], gamma, lambda);
    for (int t = 0; t < buf.n_steps; ++t) {
      buf.advantages[buf.index(t, e)] = a[t];
      buf.returns[buf.index(t, e)] = a[t] + v[t];
    }
  }
}

/// Live state of a set of environments between rollouts.
struct RolloutState {
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<Eigen::VectorXd> observations;
  std::vector<double> episode_returns;
  std::vector<double> finished_returns;  // returns of episodes completed in the last rollout
  std::mt19937_64 rng;

  RolloutState(const EnvFactory& factory, int n_envs, std::uint64_t seed) : rng(seed) {
    for (int e = 0; e < n_envs; ++e) {
      envs.push_back(factory());
      observations.push_back(envs.back()->reset(rng));
      episode_returns.push_back(0.0);
    }
  }
};

inline RolloutBuffer collect_rollout(RolloutState& st, const ActorCritic& ac, int n_steps) {
  const int n_envs = static_cast<int>(st.envs.size());
  RolloutBuffer buf(n_steps, n_envs, ac.policy.observation_dim(), ac.policy.action_dim());
  st.finished_returns.clear();
  for (int t = 0; t < n_steps; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      const auto se = static_cast<std::size_t>(e);
      const Eigen::Index i = buf.index(t, e);
      const Eigen::VectorXd& obs = st.observations[se];
      const auto sample = ac.policy.act(obs, st.rng, false);
      buf.observations.col(i) = obs;
      buf.actions.col(i) = sample.action;
      buf.log_probs[i] = sample.log_prob;
      buf.values[i] = ac.value_net.forward(obs)[0];
      const StepOutput out = st.envs[se]->step(sample.action);
      buf.rewards[i] = out.reward;
      buf.dones[i] = out.done ? 1.0 : 0.0;
      st.episode_returns[se] += out.reward;
      if (out.done) {
        st.finished_returns.push_back(st.episode_returns[se]);
        st.episode_returns[se] = 0.0;
        st.observations[se] = st.envs[se]->reset(st.rng);
      } else {
        st.observations[se] = out.observation;
      }
    }
  }
  for (int e = 0; e < n_envs; ++e) {
    buf.last_values[e] = ac.value_net.forward(st.observations[static_cast<std::size_t>(e)])[0];
  }
  return buf;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double first_batch_max_ratio_error = 0.0;  // max |ratio - 1| on the first minibatch
  double first_batch_surrogate_gap = 0.0;    // |clipped - unclipped surrogate| there
  int gradient_steps = 0;
};

inline UpdateStats ppo_update(ActorCritic& ac, Adam& opt, const RolloutBuffer& buf, const PpoConfig& cfg, double lr,
                              std::mt19937_64& rng) {
  const Eigen::Index n = buf.size();
  const int act_dim = ac.policy.action_dim();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  UpdateStats st;
  double pl_sum = 0.0, vl_sum = 0.0, kl_sum = 0.0, cf_sum = 0.0;
  int batches = 0;
  Eigen::VectorXd theta = ac.flat_parameters();
  const Eigen::Index n_mean = ac.policy.mean_net().num_parameters();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd obs(buf.observations.rows(), b), act(act_dim, b);
      Eigen::VectorXd old_lp(b), adv(b), ret(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + k)];
        obs.col(k) = buf.observations.col(i);
        act.col(k) = buf.actions.col(i);
        old_lp[k] = buf.log_probs[i];
        adv[k] = buf.advantages[i];
        ret[k] = buf.returns[i];
      }
      if (cfg.normalize_advantage && b > 1) {
        const double mu = adv.mean();
        const double sd = std::sqrt((adv.array() - mu).square().sum() / static_cast<double>(b - 1));
        adv = (adv.array() - mu) / (sd + 1e-8);
      }
      Mlp::Cache pc, vc;
      const Eigen::MatrixXd mean = ac.policy.mean_net().forward_batch(obs, &pc);
      const Eigen::MatrixXd value = ac.value_net.forward_batch(obs, &vc);
      const Eigen::VectorXd& ls = ac.policy.log_std();
      const Eigen::ArrayXd inv_var = (-2.0 * ls.array()).exp();

      Eigen::MatrixXd mean_adj = Eigen::MatrixXd::Zero(act_dim, b);
      Eigen::VectorXd ls_grad = Eigen::VectorXd::Constant(act_dim, -cfg.entropy_coef);
      Eigen::MatrixXd value_adj(1, b);
      double pl = 0.0, vl = 0.0, kl = 0.0, unclipped_sum = 0.0, clipped_sum = 0.0, max_dev = 0.0;
      int clipped = 0;
      for (Eigen::Index k = 0; k < b; ++k) {
        const double lp = ac.policy.log_prob(act.col(k), mean.col(k));
        const double ratio = std::exp(lp - old_lp[k]);
        const double rc = std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
        const double s1 = ratio * adv[k];
        const double s2 = rc * adv[k];
        pl -= std::min(s1, s2);
        unclipped_sum += s1;
        clipped_sum += std::min(s1, s2);
        max_dev = std::max(max_dev, std::abs(ratio - 1.0));
        if (std::abs(ratio - 1.0) > cfg.clip_range) ++clipped;
        kl += (ratio - 1.0) - (lp - old_lp[k]);
        const double dlp = s1 <= s2 ? -ratio * adv[k] / static_cast<double>(b) : 0.0;
        const Eigen::ArrayXd diff = (act.col(k) - mean.col(k)).array();
        mean_adj.col(k) = (dlp * diff * inv_var).matrix();
        ls_grad.array() += dlp * (diff.square() * inv_var - 1.0);
        const double err = value(0, k) - ret[k];
        vl += err * err;
        value_adj(0, k) = cfg.vf_coef * 2.0 * err / static_cast<double>(b);
      }
      const double bd = static_cast<double>(b);
      if (batches == 0) {
        st.first_batch_max_ratio_error = max_dev;
        st.first_batch_surrogate_gap = std::abs(unclipped_sum - clipped_sum) / bd;
      }
      pl_sum += pl / bd;
      vl_sum += vl / bd;
      kl_sum += kl / bd;
      cf_sum += clipped / bd;
      ++batches;

      Eigen::VectorXd g_mean = Eigen::VectorXd::Zero(n_mean);
      ac.policy.mean_net().backward(pc, mean_adj, &g_mean);
      Eigen::VectorXd g_value = Eigen::VectorXd::Zero(ac.value_net.num_parameters());
      ac.value_net.backward(vc, value_adj, &g_value);
      Eigen::VectorXd grad(theta.size());
      grad << g_mean, ls_grad, g_value;
      const double gn = grad.norm();
      if (gn > cfg.max_grad_norm) grad *= cfg.max_grad_norm / gn;
      opt.step(theta, grad, lr);
      ac.set_flat_parameters(theta);
    }
  }
  st.policy_loss = pl_sum / batches;
  st.value_loss = vl_sum / batches;
  st.approx_kl = kl_sum / batches;
  st.clip_fraction = cf_sum / batches;
  st.entropy = ac.policy.entropy();
  st.gradient_steps = batches;
  return st;
}

struct EvalResult {
  double mean_reward = 0.0;
  std::vector<double> episode_rewards;
  std::vector<int> episode_lengths;
};

inline EvalResult evaluate(const GaussianPolicy& policy, Environment& env, int n_episodes, bool deterministic,
                           std::mt19937_64& rng, int max_steps = 1000000) {
  EvalResult r;
  for (int ep = 0; ep < n_episodes; ++ep) {
    Eigen::VectorXd obs = env.reset(rng);
    double total = 0.0;
    int len = 0;
    for (; len < max_steps; ++len) {
      const auto s = policy.act(obs, rng, deterministic);
      const StepOutput out = env.step(s.action);
      total += out.reward;
      obs = out.observation;
      if (out.done) {
        ++len;
        break;
      }
    }
    r.episode_rewards.push_back(total);
    r.episode_lengths.push_back(len);
  }
  if (n_episodes > 0) {
    r.mean_reward = std::accumulate(r.episode_rewards.begin(), r.episode_rewards.end(), 0.0) / n_episodes;
  }
  return r;
}

struct CurveRow {
  long step = 0;
  double eval_reward = 0.0;
  double train_reward = 0.0;  // mean return of training episodes finished in the rollout
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ActorCritic best;
  ActorCritic last;
  double best_eval_reward = -std::numeric_limits<double>::infinity();
  long best_step = 0;
  std::vector<CurveRow> curve;
};

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,eval_reward,train_reward,policy_loss,value_loss,entropy,approx_kl,learning_rate\n";
  os.precision(10);
  for (const auto& c : curve) {
    os << c.step << ',' << c.eval_reward << ',' << c.train_reward << ',' << c.policy_loss << ',' << c.value_loss
       << ',' << c.entropy << ',' << c.approx_kl << ',' << c.learning_rate << '\n';
  }
}

struct TrainOptions {
  std::filesystem::path out_dir;                // empty: nothing written
  const ActorCritic* initial = nullptr;         // resume from these weights
  std::function<void(const CurveRow&)> on_rollout;
};

/// Rollout, update, then deterministic evaluation on a separate environment
/// (same episode starts every time); the best evaluated weights are kept.
inline TrainResult train(const EnvFactory& factory, const PpoConfig& cfg, std::uint64_t seed,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  std::mt19937_64 init_rng(seed);
  auto probe = factory();
  ActorCritic ac = opts.initial ? *opts.initial
                                : ActorCritic::create(probe->observation_dim(), probe->action_dim(), init_rng,
                                                      cfg.init_std, cfg.hidden_width, cfg.hidden_layers);
  probe.reset();
  RolloutState state(factory, cfg.n_envs, seed + 1);
  auto eval_env = factory();
  std::mt19937_64 update_rng(seed + 2);
  Adam opt(ac.flat_parameters().size());
  TrainResult res;
  long steps = 0;
  const long per_rollout = static_cast<long>(cfg.rollout_steps) * cfg.n_envs;
  auto snapshot_to = [&](const ActorCritic& a) {
    auto snap = std::make_shared<const GaussianPolicy>(a.policy);
    for (auto& e : state.envs) e->set_policy_snapshot(snap);
    eval_env->set_policy_snapshot(snap);
  };
  auto record = [&](const CurveRow& row) {
    res.curve.push_back(row);
    if (cfg.eval_episodes == 0 || row.eval_reward > res.best_eval_reward) {
      res.best_eval_reward = row.eval_reward;
      res.best = ac;
      res.best_step = steps;
      if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "best.ckpt", ac);
    }
    if (opts.on_rollout) opts.on_rollout(row);
  };
  if (cfg.eval_episodes > 0) {
    // The starting weights compete for best.ckpt too.
    snapshot_to(ac);
    std::mt19937_64 eval_rng(seed + 3);
    CurveRow row;
    row.eval_reward = evaluate(ac.policy, *eval_env, cfg.eval_episodes, true, eval_rng).mean_reward;
    row.learning_rate = cfg.lr_at(0);
    record(row);
  }
  while (steps < cfg.total_steps) {
    snapshot_to(ac);
    RolloutBuffer buf = collect_rollout(state, ac, cfg.rollout_steps);
    compute_gae(buf, cfg.gamma, cfg.gae_lambda);
    const double lr = cfg.lr_at(steps);
    const UpdateStats us = ppo_update(ac, opt, buf, cfg, lr, update_rng);
    steps += per_rollout;
    snapshot_to(ac);
    std::mt19937_64 eval_rng(seed + 3);
    const EvalResult ev = evaluate(ac.policy, *eval_env, cfg.eval_episodes, true, eval_rng);
    CurveRow row;
    row.step = steps;
    row.eval_reward = ev.mean_reward;
    row.train_reward = state.finished_returns.empty()
                           ? 0.0
                           : std::accumulate(state.finished_returns.begin(), state.finished_returns.end(), 0.0) /
                                 static_cast<double>(state.finished_returns.size());
    row.policy_loss = us.policy_loss;
    row.value_loss = us.value_loss;
    row.entropy = us.entropy;
    row.approx_kl = us.approx_kl;
    row.learning_rate = lr;
    record(row);
  }
  res.last = ac;
  if (!opts.out_dir.empty()) {
    save_checkpoint(opts.out_dir / "last.ckpt", ac);
    write_curve_csv(opts.out_dir / "curve.csv", res.curve);
  }
  return res;
}

}  // namespace iccbf
