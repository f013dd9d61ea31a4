// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "caddto/config.hpp"
#include "caddto/environment.hpp"
#include "caddto/nn/gaussian_policy.hpp"
#include "caddto/nn/mlp.hpp"
#include "caddto/ppo/gae.hpp"

namespace caddto::ppo {

/// How environment users map onto learning agents.
///
/// Decentralized: every user is an agent with a 3-dim observation and a
/// 2-dim action, all driven by one shared network. Centralized: a single
/// agent sees the concatenation of all users' observations and emits all
/// power pairs at once.
struct AgentLayout {
  bool centralized = false;
  int num_users = 1;

  [[nodiscard]] int agents() const { return centralized ? 1 : num_users; }
  [[nodiscard]] int obs_dim() const { return static_cast<int>(Observation::dim) * (centralized ? num_users : 1); }
  [[nodiscard]] int act_dim() const { return static_cast<int>(ActionVec::dim) * (centralized ? num_users : 1); }

  /// obs_dim x agents.
  [[nodiscard]] Eigen::MatrixXd agent_observations(std::span<const Observation> obs) const {
    Eigen::MatrixXd m(obs_dim(), agents());
    for (int u = 0; u < num_users; ++u) {
      const auto o = obs[static_cast<std::size_t>(u)].as_array();
      const int col = centralized ? 0 : u;
      const int row0 = centralized ? 3 * u : 0;
      for (int k = 0; k < 3; ++k) m(row0 + k, col) = o[static_cast<std::size_t>(k)];
    }
    return m;
  }

  /// act_dim x agents squashed actions back to per-user power pairs.
  [[nodiscard]] std::vector<ActionVec> user_actions(const Eigen::MatrixXd& actions) const {
    std::vector<ActionVec> out(static_cast<std::size_t>(num_users));
    for (int u = 0; u < num_users; ++u) {
      const int col = centralized ? 0 : u;
      const int row0 = centralized ? 2 * u : 0;
      out[static_cast<std::size_t>(u)] = {actions(row0, col), actions(row0 + 1, col)};
    }
    return out;
  }

  [[nodiscard]] std::vector<double> agent_rewards(std::span<const double> rewards) const {
    if (!centralized) return {rewards.begin(), rewards.end()};
    double s = 0.0;
    for (double r : rewards) s += r;
    return {s};
  }

  [[nodiscard]] Eigen::VectorXd action_scale(const SystemConfig& c) const {
    Eigen::VectorXd s(act_dim());
    for (int i = 0; i < act_dim(); i += 2) {
      s[i] = c.max_local_power_w;
      s[i + 1] = c.max_tx_power_w;
    }
    return s;
  }
};

inline std::vector<int> network_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

inline nn::GaussianPolicy make_actor(const AgentLayout& layout, const SystemConfig& c, Rng& rng) {
  auto net = nn::Mlp<double>::initialized(network_dims(layout.obs_dim(), c.ppo.hidden_dims, layout.act_dim()), rng,
                                          std::sqrt(2.0), 0.01);
  return nn::GaussianPolicy(std::move(net), layout.action_scale(c), c.ppo.init_log_std);
}

inline nn::Mlp<double> make_critic(const AgentLayout& layout, const SystemConfig& c, Rng& rng) {
  return nn::Mlp<double>::initialized(network_dims(layout.obs_dim(), c.ppo.hidden_dims, 1), rng, std::sqrt(2.0), 1.0);
}

struct Transition {
  std::vector<double> observation;
  std::vector<double> raw_action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value_estimate = 0.0;
  bool done = false;
  int agent = 0;
  int slot = 0;
};

/// Transitions of every agent track, stored step-major: entry
/// step * tracks + track. A track is one (environment, agent) pair.
struct RolloutBuffer {
  int steps = 0;
  int tracks = 0;
  Eigen::MatrixXd obs;  // obs_dim x size
  Eigen::MatrixXd raw;  // act_dim x size
  std::vector<double> log_prob;
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<unsigned char> done;
  std::vector<int> agent;
  std::vector<int> slot;
  std::vector<double> last_value;  // per track, value of the state after the final step
  std::vector<double> advantages;
  std::vector<double> returns;

  // Distinct actor instances that produced actions during collection.
  std::vector<const nn::GaussianPolicy*> actors_used;

  // Episodes that finished during this collection.
  std::vector<double> episode_reward_per_agent;
  std::vector<double> episode_reward_sum;
  double slot_reward_sum = 0.0;  // sum of per-user rewards over all slots

  [[nodiscard]] std::size_t size() const { return log_prob.size(); }
  [[nodiscard]] std::size_t index(int step, int track) const {
    return static_cast<std::size_t>(step) * static_cast<std::size_t>(tracks) + static_cast<std::size_t>(track);
  }

  [[nodiscard]] Transition transition(std::size_t i) const {
    Transition t;
    t.observation.assign(obs.col(static_cast<Eigen::Index>(i)).data(),
                         obs.col(static_cast<Eigen::Index>(i)).data() + obs.rows());
    t.raw_action.assign(raw.col(static_cast<Eigen::Index>(i)).data(),
                        raw.col(static_cast<Eigen::Index>(i)).data() + raw.rows());
    t.log_prob = log_prob[i];
    t.reward = reward[i];
    t.value_estimate = value[i];
    t.done = done[i] != 0;
    t.agent = agent[i];
    t.slot = slot[i];
    return t;
  }

  /// GAE on each track independently.
  void compute_advantages(double gamma, double lam) {
    advantages.assign(size(), 0.0);
    returns.assign(size(), 0.0);
    std::vector<double> r(static_cast<std::size_t>(steps));
    std::vector<double> v(static_cast<std::size_t>(steps));
    std::vector<unsigned char> d(static_cast<std::size_t>(steps));
    for (int k = 0; k < tracks; ++k) {
      for (int s = 0; s < steps; ++s) {
        const auto i = index(s, k);
        r[static_cast<std::size_t>(s)] = reward[i];
        v[static_cast<std::size_t>(s)] = value[i];
        d[static_cast<std::size_t>(s)] = done[i];
      }
      const auto g = compute_gae(r, v, d, last_value[static_cast<std::size_t>(k)], gamma, lam);
      for (int s = 0; s < steps; ++s) {
        const auto i = index(s, k);
        advantages[i] = g.advantages[static_cast<std::size_t>(s)];
        returns[i] = g.returns[static_cast<std::size_t>(s)];
      }
    }
  }
};

/// Persistent environments plus in-progress episode bookkeeping, so
/// consecutive collections continue where the previous one stopped.
class RolloutWorker {
public:
  RolloutWorker(const SystemConfig& c, AgentLayout layout, int num_envs, std::uint64_t stream_base = 1)
      : layout_(layout) {
    for (int e = 0; e < num_envs; ++e) {
      envs_.emplace_back(c, c.rng_stream(stream_base + static_cast<std::uint64_t>(e)));
      envs_.back().reset();
    }
    episode_reward_.assign(static_cast<std::size_t>(num_envs), 0.0);
  }

  [[nodiscard]] const AgentLayout& layout() const { return layout_; }
  std::vector<Environment>& envs() { return envs_; }

  /// Runs `steps_per_env` slots in every environment with the shared actor.
  RolloutBuffer collect(const nn::GaussianPolicy& actor, const nn::Mlp<double>& critic, int steps_per_env, Rng& rng) {
    const int agents = layout_.agents();
    const int num_envs = static_cast<int>(envs_.size());
    const auto users = static_cast<double>(layout_.num_users);
    RolloutBuffer buf;
    buf.steps = steps_per_env;
    buf.tracks = num_envs * agents;
    const auto n = static_cast<std::size_t>(buf.steps) * static_cast<std::size_t>(buf.tracks);
    buf.obs.resize(layout_.obs_dim(), static_cast<Eigen::Index>(n));
    buf.raw.resize(layout_.act_dim(), static_cast<Eigen::Index>(n));
    buf.log_prob.resize(n);
    buf.reward.resize(n);
    buf.value.resize(n);
    buf.done.resize(n);
    buf.agent.resize(n);
    buf.slot.resize(n);
    buf.last_value.resize(static_cast<std::size_t>(buf.tracks));

    const auto act_dim = static_cast<std::size_t>(layout_.act_dim());
    for (int s = 0; s < steps_per_env; ++s) {
      for (int e = 0; e < num_envs; ++e) {
        Environment& env = envs_[static_cast<std::size_t>(e)];
        const Eigen::MatrixXd obs = layout_.agent_observations(env.observations());
        const Eigen::MatrixXd values = critic.forward(obs);
        Eigen::MatrixXd actions(layout_.act_dim(), agents);
        const int slot = env.state().t;
        for (int a = 0; a < agents; ++a) {
          const nn::GaussianPolicy* shared = &actor;
          if (std::find(buf.actors_used.begin(), buf.actors_used.end(), shared) == buf.actors_used.end()) {
            buf.actors_used.push_back(shared);
          }
          const auto sample =
              nn::sample_action(*shared, std::span<const double>(obs.col(a).data(), static_cast<std::size_t>(obs.rows())), rng);
          const auto i = buf.index(s, e * agents + a);
          buf.obs.col(static_cast<Eigen::Index>(i)) = obs.col(a);
          for (std::size_t j = 0; j < act_dim; ++j) {
            buf.raw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = sample.raw[j];
            actions(static_cast<Eigen::Index>(j), a) = sample.action[j];
          }
          buf.log_prob[i] = sample.log_prob;
          buf.value[i] = values(0, a);
          buf.agent[i] = a;
          buf.slot[i] = slot;
        }

        const auto joint = layout_.user_actions(actions);
        const StepResult r = env.step(joint);
        const auto rewards = layout_.agent_rewards(r.rewards);
        double slot_sum = 0.0;
        for (double x : r.rewards) slot_sum += x;
        buf.slot_reward_sum += slot_sum;
        episode_reward_[static_cast<std::size_t>(e)] += slot_sum;
        for (int a = 0; a < agents; ++a) {
          const auto i = buf.index(s, e * agents + a);
          buf.reward[i] = rewards[static_cast<std::size_t>(a)];
          buf.done[i] = r.done ? 1 : 0;
        }
        if (r.done) {
          const double total = episode_reward_[static_cast<std::size_t>(e)];
          buf.episode_reward_sum.push_back(total);
          buf.episode_reward_per_agent.push_back(total / users);
          episode_reward_[static_cast<std::size_t>(e)] = 0.0;
          env.reset();
        }
      }
    }
    for (int e = 0; e < num_envs; ++e) {
      const Eigen::MatrixXd obs = layout_.agent_observations(envs_[static_cast<std::size_t>(e)].observations());
      const Eigen::MatrixXd values = critic.forward(obs);
      for (int a = 0; a < agents; ++a) buf.last_value[static_cast<std::size_t>(e * agents + a)] = values(0, a);
    }
    return buf;
  }

private:
  AgentLayout layout_;
  std::vector<Environment> envs_;
  std::vector<double> episode_reward_;
};

}  // namespace caddto::ppo
