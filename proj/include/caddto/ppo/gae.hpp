// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace caddto::ppo {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE along one agent's trajectory.
///
/// dones[t] marks t as the last transition of an episode: neither the TD
/// target nor the advantage recursion reaches past it. `next_value` is the
/// critic estimate for the state following the final transition.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const unsigned char> dones, double next_value, double gamma, double lam) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double v_next = (i + 1 < n) ? values[i + 1] : next_value;
    const double delta = rewards[i] + gamma * v_next * not_done - values[i];
    running = delta + gamma * lam * not_done * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

}  // namespace caddto::ppo
