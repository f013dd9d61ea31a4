// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caddto/config.hpp"
#include "caddto/nn/adam.hpp"
#include "caddto/nn/gaussian_policy.hpp"
#include "caddto/nn/mlp.hpp"
#include "caddto/ppo/rollout.hpp"

namespace caddto::ppo {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// RNG stream ids used by the trainer; environments use 1 + env index.
inline constexpr std::uint64_t kStreamSampling = 1000;
inline constexpr std::uint64_t kStreamShuffle = 1001;
inline constexpr std::uint64_t kStreamInit = 1002;

struct TrainReport {
  int update_index = 0;
  long long env_steps = 0;
  double mean_episode_reward = 0.0;      // per agent
  double mean_episode_reward_sum = 0.0;  // summed over users
  int episodes_completed = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  bool advantages_normalized = true;
};

struct Surrogate {
  double objective = 0.0;
  double d_ratio = 0.0;  // d objective / d ratio
};

/// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative in r.
inline Surrogate clipped_surrogate(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return {unclipped, advantage};
  return {clipped, 0.0};
}

/// Zero-mean, unit-variance copy of `adv`; unchanged when the spread is zero.
inline std::vector<double> normalize_advantages(std::span<const double> adv) {
  std::vector<double> out(adv.begin(), adv.end());
  if (out.size() < 2) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double var = 0.0;
  for (double a : out) var += (a - mean) * (a - mean);
  var /= static_cast<double>(out.size());
  const double sd = std::sqrt(var);
  for (double& a : out) a = (a - mean) / (sd + 1e-8);
  return out;
}

struct Learner {
  nn::GaussianPolicy actor;
  nn::Mlp<double> critic;
  nn::AdamState actor_adam;
  nn::AdamState critic_adam;
};

namespace detail {

inline std::vector<std::span<double>> actor_parameter_views(nn::GaussianPolicy& p) {
  auto views = nn::parameter_views(p.trunk);
  views.emplace_back(p.log_std.data(), static_cast<std::size_t>(p.log_std.size()));
  return views;
}

inline bool all_finite(std::span<const std::span<const double>> views) {
  for (const auto& v : views) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Clipped-surrogate PPO over an advantage-annotated buffer.
///
/// For each epoch the buffer is shuffled into minibatches; each minibatch
/// takes one Adam step on the actor (policy loss minus entropy bonus) and
/// one on the critic (value_coef times the squared-error loss).
inline TrainReport ppo_update(const RolloutBuffer& buf, Learner& learner, const SystemConfig& c, Rng& shuffle_rng) {
  const auto& p = c.ppo;
  const std::size_t n = buf.size();
  if (buf.advantages.size() != n) throw std::invalid_argument("ppo_update: advantages not computed");
  TrainReport rep;
  rep.advantages_normalized = p.normalize_advantages;
  if (n == 0) return rep;

  nn::GaussianPolicy& actor = learner.actor;
  nn::Mlp<double>& critic = learner.critic;
  const int obs_dim = actor.obs_dim();
  const int act_dim = actor.action_dim();
  const nn::AdamOptions adam{p.learning_rate, 0.9, 0.999, 1e-8};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double policy_loss_sum = 0.0;
  double value_loss_sum = 0.0;
  double entropy_sum = 0.0;
  double kl_sum = 0.0;
  std::size_t clipped = 0;
  std::size_t samples = 0;
  std::size_t batches = 0;

  const auto mb = static_cast<std::size_t>(p.minibatch);
  Eigen::MatrixXd obs;
  Eigen::MatrixXd raw;
  std::vector<double> old_lp;
  std::vector<double> adv;
  std::vector<double> ret;
  for (int epoch = 0; epoch < p.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t b = std::min(mb, n - start);
      const auto bi = static_cast<Eigen::Index>(b);
      obs.resize(obs_dim, bi);
      raw.resize(act_dim, bi);
      old_lp.resize(b);
      adv.resize(b);
      ret.resize(b);
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t i = order[start + k];
        obs.col(static_cast<Eigen::Index>(k)) = buf.obs.col(static_cast<Eigen::Index>(i));
        raw.col(static_cast<Eigen::Index>(k)) = buf.raw.col(static_cast<Eigen::Index>(i));
        old_lp[k] = buf.log_prob[i];
        adv[k] = buf.advantages[i];
        ret[k] = buf.returns[i];
      }
      if (p.normalize_advantages) adv = normalize_advantages(adv);

      // Actor.
      nn::Mlp<double>::Cache actor_cache;
      const auto eval = nn::evaluate_actions(actor, obs, raw, &actor_cache);
      const Eigen::VectorXd inv_var = (-2.0 * actor.log_std.array()).exp().matrix();
      Eigen::MatrixXd d_mean(act_dim, bi);
      Eigen::VectorXd d_log_std = Eigen::VectorXd::Constant(act_dim, -p.entropy_coef);
      double policy_loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double log_ratio = eval.log_probs[kk] - old_lp[k];
        const double ratio = std::exp(log_ratio);
        const Surrogate s = clipped_surrogate(ratio, adv[k], p.clip);
        policy_loss -= s.objective * inv_b;
        if (std::abs(ratio - 1.0) > p.clip) ++clipped;
        kl_sum += -log_ratio;
        // d(-objective/b)/d(log_prob) = -(d_ratio * ratio) / b
        const double coef = -s.d_ratio * ratio * inv_b;
        for (int j = 0; j < act_dim; ++j) {
          const double diff = raw(j, kk) - eval.means(j, kk);
          d_mean(j, kk) = coef * diff * inv_var[j];
          d_log_std[j] += coef * (diff * diff * inv_var[j] - 1.0);
        }
      }
      auto actor_grads = actor.trunk.backward(actor_cache, d_mean);

      // Critic.
      nn::Mlp<double>::Cache critic_cache;
      const Eigen::MatrixXd values = critic.forward(obs, &critic_cache);
      Eigen::MatrixXd d_value(1, bi);
      double value_loss = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double err = values(0, kk) - ret[k];
        value_loss += err * err * inv_b;
        d_value(0, kk) = p.value_coef * 2.0 * err * inv_b;
      }
      auto critic_grads = critic.backward(critic_cache, d_value);

      // NaN guard before any parameter moves.
      if (!std::isfinite(policy_loss) || !std::isfinite(value_loss) || !std::isfinite(eval.entropy)) {
        throw TrainingError("ppo_update: non-finite loss (policy " + std::to_string(policy_loss) + ", value " +
                            std::to_string(value_loss) + ")");
      }
      auto actor_views = nn::gradient_views(actor_grads);
      actor_views.emplace_back(d_log_std.data(), static_cast<std::size_t>(d_log_std.size()));
      const auto critic_views = nn::gradient_views(critic_grads);
      if (!detail::all_finite(actor_views) || !detail::all_finite(critic_views)) {
        throw TrainingError("ppo_update: non-finite gradient");
      }
      if (p.max_grad_norm > 0.0) {
        std::vector<std::span<double>> a_mut;
        for (auto& w : actor_grads.weights) a_mut.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
        for (auto& v : actor_grads.biases) a_mut.emplace_back(v.data(), static_cast<std::size_t>(v.size()));
        a_mut.emplace_back(d_log_std.data(), static_cast<std::size_t>(d_log_std.size()));
        nn::clip_global_norm(a_mut, p.max_grad_norm);
        std::vector<std::span<double>> c_mut;
        for (auto& w : critic_grads.weights) c_mut.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
        for (auto& v : critic_grads.biases) c_mut.emplace_back(v.data(), static_cast<std::size_t>(v.size()));
        nn::clip_global_norm(c_mut, p.max_grad_norm);
      }

      const auto actor_params = detail::actor_parameter_views(actor);
      nn::adam_update(actor_params, actor_views, learner.actor_adam, adam);
      actor.clamp_log_std();
      nn::adam_update(nn::parameter_views(critic), critic_views, learner.critic_adam, adam);

      policy_loss_sum += policy_loss;
      value_loss_sum += value_loss;
      entropy_sum += eval.entropy;
      samples += b;
      ++batches;
    }
  }
  rep.policy_loss = policy_loss_sum / static_cast<double>(batches);
  rep.value_loss = value_loss_sum / static_cast<double>(batches);
  rep.entropy = entropy_sum / static_cast<double>(batches);
  rep.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples);
  rep.approx_kl = kl_sum / static_cast<double>(samples);
  return rep;
}

struct TrainOptions {
  long long total_steps = -1;  // env slots; negative means episodes * episode_len
  bool centralized = false;
  std::function<void(const TrainReport&)> on_update;  // progress hook
};

struct TrainResult {
  nn::GaussianPolicy policy;       // final parameters
  nn::Mlp<double> critic;
  nn::GaussianPolicy best_policy;  // highest mean episode reward seen
  double best_reward = -INFINITY;
  std::vector<TrainReport> curve;
};

/// Alternates rollout collection and PPO updates until the slot budget is
/// spent. Each update consumes n_steps slots split evenly over num_envs
/// environments.
inline TrainResult train(const SystemConfig& c, const TrainOptions& opt = {}) {
  validate(c);
  const AgentLayout layout{opt.centralized, c.num_users};
  Rng init_rng = c.rng_stream(kStreamInit);
  Learner learner{make_actor(layout, c, init_rng), make_critic(layout, c, init_rng), {}, {}};
  TrainResult result{learner.actor, learner.critic, learner.actor, -INFINITY, {}};

  const long long budget =
      opt.total_steps >= 0 ? opt.total_steps : static_cast<long long>(c.episodes) * c.episode_len;
  const long long updates = budget / c.ppo.n_steps;
  if (updates == 0) return result;

  Rng sample_rng = c.rng_stream(kStreamSampling);
  Rng shuffle_rng = c.rng_stream(kStreamShuffle);
  RolloutWorker worker(c, layout, c.ppo.num_envs);
  const int per_env = c.ppo.n_steps / c.ppo.num_envs;
  long long env_steps = 0;
  for (long long u = 0; u < updates; ++u) {
    RolloutBuffer buf = worker.collect(learner.actor, learner.critic, per_env, sample_rng);
    buf.compute_advantages(c.ppo.gamma, c.ppo.gae_lambda);
    env_steps += c.ppo.n_steps;

    TrainReport rep = ppo_update(buf, learner, c, shuffle_rng);
    rep.update_index = static_cast<int>(u);
    rep.env_steps = env_steps;
    rep.episodes_completed = static_cast<int>(buf.episode_reward_per_agent.size());
    if (rep.episodes_completed > 0) {
      const double k = static_cast<double>(rep.episodes_completed);
      rep.mean_episode_reward =
          std::accumulate(buf.episode_reward_per_agent.begin(), buf.episode_reward_per_agent.end(), 0.0) / k;
      rep.mean_episode_reward_sum =
          std::accumulate(buf.episode_reward_sum.begin(), buf.episode_reward_sum.end(), 0.0) / k;
    } else {
      // No episode finished: extrapolate from the mean slot reward.
      const double slots = static_cast<double>(per_env) * static_cast<double>(c.ppo.num_envs);
      rep.mean_episode_reward_sum = buf.slot_reward_sum / slots * c.episode_len;
      rep.mean_episode_reward = rep.mean_episode_reward_sum / c.num_users;
    }
    // The rollout that produced this reward came from the pre-update actor.
    if (rep.mean_episode_reward > result.best_reward) {
      result.best_reward = rep.mean_episode_reward;
      result.best_policy = result.policy;
    }
    result.policy = learner.actor;
    result.critic = learner.critic;
    result.curve.push_back(rep);
    if (opt.on_update) opt.on_update(rep);
  }
  return result;
}

inline TrainResult train_centralized(const SystemConfig& c, TrainOptions opt = {}) {
  opt.centralized = true;
  return train(c, opt);
}

inline constexpr const char* kCurveHeader =
    "update_index,env_steps,mean_episode_reward,policy_loss,value_loss,entropy,clip_fraction,mean_episode_reward_sum";

inline void write_curve_csv(std::ostream& os, std::span<const TrainReport> curve) {
  os << kCurveHeader << '\n';
  char line[512];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof line, "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.update_index, r.env_steps,
                  r.mean_episode_reward, r.policy_loss, r.value_loss, r.entropy, r.clip_fraction,
                  r.mean_episode_reward_sum);
    os << line;
  }
}

}  // namespace caddto::ppo
