// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caddto/channel.hpp"
#include "caddto/config.hpp"
#include "caddto/device.hpp"
#include "caddto/rng.hpp"

namespace caddto {

/// Local state seen by one agent; every component lies in [0, 1].
struct Observation {
  double buffer_norm = 0.0;
  double harvest_norm = 0.0;
  double sinr_norm = 0.0;

  static constexpr std::size_t dim = 3;
  [[nodiscard]] std::array<double, dim> as_array() const { return {buffer_norm, harvest_norm, sinr_norm}; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Per-user power pair (local CPU power, uplink transmit power), in Watts.
struct ActionVec {
  double local_power_w = 0.0;
  double tx_power_w = 0.0;

  static constexpr std::size_t dim = 2;
  friend bool operator==(const ActionVec&, const ActionVec&) = default;
};

/// Everything that happened to one user during one slot.
struct UserSlot {
  double local_power_w = 0.0;
  double tx_power_w = 0.0;
  double sinr = 0.0;
  double local_bits = 0.0;
  double offloaded_bits = 0.0;
  double backlog_before = 0.0;
  double backlog_after = 0.0;
  double arrivals_bits = 0.0;
  double drained_bits = 0.0;
  double overflow_bits = 0.0;
  double energy_demand = 0.0;
  double green_fraction = 1.0;
  double harvested = 0.0;
  double battery_after = 0.0;
  double mec_power_w = 0.0;
  double grid_energy = 0.0;
  double carbon_g = 0.0;
  double wastage = 0.0;
  double reward = 0.0;
};

struct StepInfo {
  int t = 0;  // slot index this record describes
  std::vector<UserSlot> users;
  double system_carbon_g = 0.0;
};

struct EnvState {
  std::vector<TaskQueue> queues;
  std::vector<Battery> batteries;
  ChannelState channel;
  std::vector<double> prev_sinr;
  std::vector<double> prev_tx_power;
  std::vector<double> harvest;  // energy harvested during the current slot, visible before acting
  int t = 0;

  [[nodiscard]] std::size_t num_users() const { return queues.size(); }
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct ResetResult {
  EnvState state;
  std::vector<Observation> observations;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  StepInfo info;
  bool done = false;
};

// ---------------------------------------------------------------------------
// Normalization shared by the reward, the long-term overhead and the DPP
// baseline.

/// MEC draw at the SINR target, used as the largest "expected" MEC power.
inline double reference_mec_power(const SystemConfig& c) {
  const double bits = offloaded_bits(c.bandwidth_hz * std::log2(1.0 + c.sinr_target), c.slot_duration_s);
  return mec_power(bits, c.cycles_per_bit, c.mec_energy_per_cycle_j, c.slot_duration_s);
}

/// Carbon of a slot at full device power plus the reference MEC draw.
inline double reference_carbon(const SystemConfig& c) {
  return carbon(c.max_energy_demand() + reference_mec_power(c), c.carbon_factor_g_per_kwh);
}

struct RewardTerms {
  double buffer = 0.0;
  double carbon = 0.0;
  double overflow = 0.0;
  double wastage = 0.0;
};

inline RewardTerms normalized_terms(double buffer_norm, double carbon_g, double overflow_bits, double wastage,
                                    const SystemConfig& c) {
  auto unit = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return {unit(buffer_norm), unit(carbon_g / reference_carbon(c)), unit(overflow_bits / c.buffer_capacity_bits),
          unit(wastage / c.max_energy_demand())};
}

inline double compute_reward(double buffer_norm, double carbon_g, double overflow_bits, double wastage,
                             const SystemConfig& c) {
  const auto n = normalized_terms(buffer_norm, carbon_g, overflow_bits, wastage, c);
  const auto& w = c.reward_weights;
  return -(w[0] * n.buffer + w[1] * n.carbon + w[2] * (n.overflow + n.wastage));
}

inline Observation build_observation(const TaskQueue& q, double harvested, double prev_sinr, const SystemConfig& c) {
  Observation o;
  o.buffer_norm = std::clamp(q.backlog_bits / c.buffer_capacity_bits, 0.0, 1.0);
  o.harvest_norm = std::clamp(harvested / c.harvest_norm, 0.0, 1.0);
  o.sinr_norm = std::clamp(prev_sinr / c.sinr_target, 0.0, 1.0);
  return o;
}

inline std::vector<Observation> observe(const EnvState& s, const SystemConfig& c) {
  std::vector<Observation> obs(s.num_users());
  for (std::size_t u = 0; u < obs.size(); ++u) obs[u] = build_observation(s.queues[u], s.harvest[u], s.prev_sinr[u], c);
  return obs;
}

// ---------------------------------------------------------------------------

/// Empty queues, half-charged batteries, fresh channel, no SINR history.
///
/// RNG draw order: channel positions, channel vectors, then one harvest
/// draw per user for slot 0.
inline ResetResult reset(const SystemConfig& c, Rng& rng) {
  const auto users = static_cast<std::size_t>(c.num_users);
  EnvState s;
  s.queues.assign(users, TaskQueue{0.0, c.buffer_capacity_bits});
  s.batteries.assign(users, Battery{c.initial_battery_fraction * c.battery_capacity, c.battery_capacity});
  s.channel = init_channel(c, rng);
  s.prev_sinr.assign(users, 0.0);
  s.prev_tx_power.assign(users, 0.0);
  s.harvest.resize(users);
  for (auto& h : s.harvest) h = static_cast<double>(sample_poisson(c.harvest_rate_mean, rng));
  s.t = 0;
  auto obs = observe(s, c);
  return {std::move(s), std::move(obs)};
}

inline void check_actions(std::span<const ActionVec> actions, const SystemConfig& c, std::size_t users) {
  if (actions.size() != users) throw std::invalid_argument("step: expected one action per user");
  for (const auto& a : actions) {
    const bool ok = std::isfinite(a.local_power_w) && std::isfinite(a.tx_power_w) && a.local_power_w >= 0.0 &&
                    a.local_power_w <= c.max_local_power_w && a.tx_power_w >= 0.0 && a.tx_power_w <= c.max_tx_power_w;
    if (!ok) throw std::invalid_argument("step: action outside [0, P_max]");
  }
}

/// Advances one slot in place.
///
/// Order within the slot: local service, joint SINR and offload, queue
/// settlement with this slot's arrivals, energy and carbon bookkeeping,
/// rewards, then SINR feedback, channel evolution and the slot counter.
/// RNG draw order: arrivals (per user), next-slot harvest (per user),
/// mobility, channel innovations.
inline StepResult step(EnvState& s, std::span<const ActionVec> actions, const SystemConfig& c, Rng& rng) {
  const std::size_t users = s.num_users();
  check_actions(actions, c, users);

  StepResult out;
  out.info.t = s.t;
  out.info.users.resize(users);
  out.rewards.resize(users);

  std::vector<double> tx(users);
  for (std::size_t u = 0; u < users; ++u) tx[u] = actions[u].tx_power_w;
  const SinrReport link = compute_sinr(s.channel, tx, c);

  std::vector<double> arrivals(users);
  for (auto& a : arrivals) a = static_cast<double>(sample_poisson(c.arrival_rate_mean, rng)) * c.arrival_unit_bits;

  for (std::size_t u = 0; u < users; ++u) {
    UserSlot& r = out.info.users[u];
    r.local_power_w = actions[u].local_power_w;
    r.tx_power_w = actions[u].tx_power_w;
    r.local_bits = local_bits(cpu_speed(r.local_power_w, c.switching_cap), c.slot_duration_s, c.cycles_per_bit);
    r.sinr = link.sinr[u];
    r.offloaded_bits = offloaded_bits(link.rate_bps[u], c.slot_duration_s);

    r.backlog_before = s.queues[u].backlog_bits;
    r.arrivals_bits = arrivals[u];
    const QueueStep qs = queue_step(s.queues[u], r.local_bits, r.offloaded_bits, r.arrivals_bits);
    r.drained_bits = qs.drained_bits;
    r.overflow_bits = qs.overflow_bits;
    r.backlog_after = qs.next_backlog_bits;
    s.queues[u].backlog_bits = qs.next_backlog_bits;

    r.energy_demand = r.local_power_w + r.tx_power_w;
    r.green_fraction = green_fraction(s.batteries[u].level, r.energy_demand);
    r.harvested = s.harvest[u];
    s.batteries[u] = battery_step(s.batteries[u], r.energy_demand, r.green_fraction, r.harvested);
    r.battery_after = s.batteries[u].level;
    r.mec_power_w = mec_power(r.offloaded_bits, c.cycles_per_bit, c.mec_energy_per_cycle_j, c.slot_duration_s);
    r.grid_energy = grid_energy(r.energy_demand, r.green_fraction, r.mec_power_w);
    r.carbon_g = carbon(r.grid_energy, c.carbon_factor_g_per_kwh);
    r.wastage = energy_wastage(r.energy_demand, r.local_bits + r.offloaded_bits, r.backlog_before);

    r.reward = compute_reward(r.backlog_after / c.buffer_capacity_bits, r.carbon_g, r.overflow_bits, r.wastage, c);
    out.rewards[u] = r.reward;
    out.info.system_carbon_g += r.carbon_g;

    s.prev_sinr[u] = r.sinr;
    s.prev_tx_power[u] = r.tx_power_w;
  }

  for (auto& h : s.harvest) h = static_cast<double>(sample_poisson(c.harvest_rate_mean, rng));
  s.channel = step_channel(std::move(s.channel), c, rng);
  ++s.t;
  out.done = s.t >= c.episode_len;
  out.observations = observe(s, c);
  return out;
}

/// Per-user mean of w1 B + w2 carbon + w3 wastage (normalized) over a history.
inline std::vector<double> long_term_overhead(std::span<const StepInfo> history, const SystemConfig& c) {
  if (history.empty()) throw std::invalid_argument("long_term_overhead: empty history");
  const std::size_t users = history.front().users.size();
  std::vector<double> total(users, 0.0);
  const auto& w = c.reward_weights;
  for (const auto& info : history) {
    for (std::size_t u = 0; u < users; ++u) {
      const auto& r = info.users[u];
      const auto n = normalized_terms(r.backlog_after / c.buffer_capacity_bits, r.carbon_g, 0.0, r.wastage, c);
      total[u] += w[0] * n.buffer + w[1] * n.carbon + w[2] * n.wastage;
    }
  }
  for (auto& v : total) v /= static_cast<double>(history.size());
  return total;
}

/// Stateful wrapper owning config, state and RNG for rollout loops.
class Environment {
public:
  Environment(SystemConfig config, Rng rng) : config_(std::move(config)), rng_(std::move(rng)) {}

  const std::vector<Observation>& reset() {
    auto r = caddto::reset(config_, rng_);
    state_ = std::move(r.state);
    obs_ = std::move(r.observations);
    return obs_;
  }

  StepResult step(std::span<const ActionVec> actions) {
    StepResult r = caddto::step(state_, actions, config_, rng_);
    obs_ = r.observations;
    return r;
  }

  [[nodiscard]] const SystemConfig& config() const { return config_; }
  [[nodiscard]] const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  [[nodiscard]] const std::vector<Observation>& observations() const { return obs_; }
  [[nodiscard]] std::size_t num_users() const { return static_cast<std::size_t>(config_.num_users); }
  Rng& rng() { return rng_; }

private:
  SystemConfig config_;
  Rng rng_;
  EnvState state_;
  std::vector<Observation> obs_;
};

// ---------------------------------------------------------------------------
// Per-slot trace CSV.

inline constexpr const char* kTraceHeader =
    "t,user,p_l,p_o,sinr,d_l,d_o,backlog,overflow,g,grid_energy,carbon_g,wastage,reward";

inline void write_trace_header(std::ostream& os) { os << kTraceHeader << '\n'; }

inline void write_trace_rows(std::ostream& os, const StepInfo& info) {
  char line[512];
  for (std::size_t u = 0; u < info.users.size(); ++u) {
    const auto& r = info.users[u];
    std::snprintf(line, sizeof line, "%d,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  info.t, u, r.local_power_w, r.tx_power_w, r.sinr, r.local_bits, r.offloaded_bits, r.backlog_after,
                  r.overflow_bits, r.green_fraction, r.grid_energy, r.carbon_g, r.wastage, r.reward);
    os << line;
  }
}

}  // namespace caddto
