// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "caddto/channel.hpp"
#include "caddto/config.hpp"
#include "caddto/device.hpp"
#include "caddto/environment.hpp"

namespace caddto {

enum class PolicyKind { CaddtoPpo, CentralizedPpo, LyapunovDpp, Greedy, LocalOnly, OffloadOnly };

inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::CaddtoPpo,   PolicyKind::CentralizedPpo,
                                              PolicyKind::LyapunovDpp, PolicyKind::Greedy,
                                              PolicyKind::LocalOnly,   PolicyKind::OffloadOnly};

/// Display name used in result CSVs.
inline std::string_view policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::CaddtoPpo: return "CADDTO-PPO";
    case PolicyKind::CentralizedPpo: return "Centralized-PPO";
    case PolicyKind::LyapunovDpp: return "Lyapunov-DPP";
    case PolicyKind::Greedy: return "Greedy";
    case PolicyKind::LocalOnly: return "LocalOnly";
    case PolicyKind::OffloadOnly: return "OffloadOnly";
  }
  return "?";
}

/// Command-line token.
inline std::string_view policy_token(PolicyKind k) {
  switch (k) {
    case PolicyKind::CaddtoPpo: return "caddto";
    case PolicyKind::CentralizedPpo: return "central";
    case PolicyKind::LyapunovDpp: return "dpp";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::LocalOnly: return "local";
    case PolicyKind::OffloadOnly: return "offload";
  }
  return "?";
}

/// Accepts either the CLI token or the display name.
inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  for (PolicyKind k : kAllPolicies) {
    if (s == policy_token(k) || s == policy_name(k)) return k;
  }
  return std::nullopt;
}

inline bool is_learned(PolicyKind k) { return k == PolicyKind::CaddtoPpo || k == PolicyKind::CentralizedPpo; }

// ---------------------------------------------------------------------------
// Rule-based policies on one user's local observation.

inline ActionVec greedy_policy(const Observation&, const SystemConfig& c) {
  return {c.max_local_power_w, c.max_tx_power_w};
}

/// Just enough CPU power to clear the current backlog in one slot.
inline ActionVec local_only_policy(const Observation& o, const SystemConfig& c) {
  const double backlog = o.buffer_norm * c.buffer_capacity_bits;
  const double cycles_per_s = c.cycles_per_bit * backlog / c.slot_duration_s;
  return {std::min(c.max_local_power_w, cpu_power(cycles_per_s, c.switching_cap)), 0.0};
}

inline ActionVec offload_only_policy(const Observation& o, const SystemConfig& c) {
  return {0.0, o.buffer_norm > 0.0 ? c.max_tx_power_w : 0.0};
}

// ---------------------------------------------------------------------------
// Lyapunov drift-plus-penalty.

struct DppLocalState {
  double backlog_bits = 0.0;
  double battery_level = 0.0;
  double prev_sinr = 0.0;
  double prev_tx_power_w = 0.0;
};

inline DppLocalState dpp_local_state(const EnvState& s, std::size_t u) {
  return {s.queues[u].backlog_bits, s.batteries[u].level, s.prev_sinr[u], s.prev_tx_power[u]};
}

/// SINR the controller expects at `tx_power`: last slot's SINR scaled
/// linearly in power, or the SINR target at full power when there is no
/// usable feedback.
inline double dpp_predicted_sinr(const DppLocalState& s, double tx_power, const SystemConfig& c) {
  if (s.prev_tx_power_w > 0.0 && s.prev_sinr > 0.0) return s.prev_sinr * tx_power / s.prev_tx_power_w;
  return c.sinr_target * tx_power / c.max_tx_power_w;
}

/// Drift B(B+ - B) plus V times the weighted carbon and wastage penalty,
/// with queue, carbon and wastage in the reward's normalized units.
inline double dpp_objective(const DppLocalState& s, const ActionVec& a, const SystemConfig& c) {
  const double d_l = local_bits(cpu_speed(a.local_power_w, c.switching_cap), c.slot_duration_s, c.cycles_per_bit);
  const double sinr = dpp_predicted_sinr(s, a.tx_power_w, c);
  const double d_o = offloaded_bits(c.bandwidth_hz * std::log2(1.0 + sinr), c.slot_duration_s);
  const double q = c.buffer_capacity_bits;
  const double expected_arrivals = c.arrival_rate_mean * c.arrival_unit_bits;
  const double b_now = s.backlog_bits / q;
  // Not clamped to capacity: a clamp would make service look useless
  // whenever a full buffer receives more than it can drain.
  const double b_next = (std::max(s.backlog_bits - (d_l + d_o), 0.0) + expected_arrivals) / q;
  const double drift = b_now * (b_next - b_now);

  const double demand = a.local_power_w + a.tx_power_w;
  const double g = green_fraction(s.battery_level, demand);
  const double mec = mec_power(d_o, c.cycles_per_bit, c.mec_energy_per_cycle_j, c.slot_duration_s);
  const double co2 = carbon(grid_energy(demand, g, mec), c.carbon_factor_g_per_kwh);
  const double waste = energy_wastage(demand, d_l + d_o, s.backlog_bits);
  const auto n = normalized_terms(0.0, co2, 0.0, waste, c);
  return drift + c.lyapunov_v * (c.reward_weights[1] * n.carbon + c.reward_weights[2] * n.wastage);
}

inline double dpp_grid_value(int index, int levels, double max_power) {
  return max_power * static_cast<double>(index) / static_cast<double>(levels - 1);
}

/// Exhaustive search of the G x G power grid. Ties go to the lower total
/// power, then to the first candidate in (local, tx) order.
inline ActionVec lyapunov_dpp_policy(const DppLocalState& s, const SystemConfig& c,
                                     std::uint64_t* evaluations = nullptr) {
  const int levels = c.grid_levels;
  if (levels < 2) throw std::invalid_argument("lyapunov_dpp_policy: grid_levels must be >= 2");
  ActionVec best{0.0, 0.0};
  double best_obj = INFINITY;
  double best_power = INFINITY;
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels; ++j) {
      const ActionVec a{dpp_grid_value(i, levels, c.max_local_power_w), dpp_grid_value(j, levels, c.max_tx_power_w)};
      const double obj = dpp_objective(s, a, c);
      if (evaluations) ++*evaluations;
      const double power = a.local_power_w + a.tx_power_w;
      if (obj < best_obj || (obj == best_obj && power < best_power)) {
        best = a;
        best_obj = obj;
        best_power = power;
      }
    }
  }
  return best;
}

/// Candidate count of a G-level grid over `action_dims` dimensions.
inline std::uint64_t dpp_complexity(int levels, int action_dims) {
  if (levels < 1) throw std::invalid_argument("dpp_complexity: levels must be >= 1");
  std::uint64_t n = 1;
  for (int d = 0; d < action_dims; ++d) n *= static_cast<std::uint64_t>(levels);
  return n;
}

}  // namespace caddto
