// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "caddto/rng.hpp"

namespace caddto {

struct TaskQueue {
  double backlog_bits = 0.0;
  double capacity_bits = 0.0;
  friend bool operator==(const TaskQueue&, const TaskQueue&) = default;
};

struct Battery {
  double level = 0.0;
  double capacity = 0.0;
  friend bool operator==(const Battery&, const Battery&) = default;
};

struct QueueStep {
  double remaining_bits = 0.0;
  double next_backlog_bits = 0.0;
  double overflow_bits = 0.0;
  double drained_bits = 0.0;
};

/// DVFS: c = (p / k)^(1/3) cycles per second.
inline double cpu_speed(double local_power_w, double switching_cap) {
  return std::cbrt(local_power_w / switching_cap);
}

/// Power needed to run at `cycles_per_s`; inverse of cpu_speed.
inline double cpu_power(double cycles_per_s, double switching_cap) {
  return switching_cap * cycles_per_s * cycles_per_s * cycles_per_s;
}

inline double local_bits(double cycles_per_s, double slot_s, double cycles_per_bit) {
  return slot_s * cycles_per_s / cycles_per_bit;
}

/// MEC server power for processing `offloaded_bits` within one slot.
inline double mec_power(double offloaded_bits, double cycles_per_bit, double kappa, double slot_s) {
  return kappa * cycles_per_bit * offloaded_bits / slot_s;
}

/// Service, then arrivals. Overflow is measured on the post-arrival level
/// and the stored backlog is clamped to capacity. Service is counted in
/// whole bits, so integral backlogs and arrivals keep every quantity
/// integral and the per-slot bit balance holds exactly.
inline QueueStep queue_step(const TaskQueue& q, double d_l, double d_o, double arrivals) {
  const double service = std::floor(d_l + d_o);
  QueueStep s;
  s.drained_bits = std::min(service, q.backlog_bits);
  s.remaining_bits = std::max(q.backlog_bits - service, 0.0);
  const double candidate = s.remaining_bits + arrivals;
  s.overflow_bits = std::max(0.0, candidate - q.capacity_bits);
  s.next_backlog_bits = std::min(candidate, q.capacity_bits);
  return s;
}

/// Share of this slot's demand covered by the battery; 1 for an idle slot.
inline double green_fraction(double battery_level, double energy_demand) {
  if (energy_demand <= 0.0) return 1.0;
  return std::min(1.0, battery_level / energy_demand);
}

inline Battery battery_step(const Battery& b, double energy_demand, double g, double harvested) {
  const double drawn = std::max(b.level - energy_demand * g, 0.0);
  return {std::min(drawn + harvested, b.capacity), b.capacity};
}

/// Device shortfall plus the (always grid-powered) MEC draw.
inline double grid_energy(double energy_demand, double g, double mec_power_w) {
  return energy_demand * (1.0 - g) + mec_power_w;
}

/// Grams of CO2 for `grid_energy_units` joules at a g/kWh emission factor.
inline double carbon(double grid_energy_units, double carbon_factor_g_per_kwh) {
  return grid_energy_units * (carbon_factor_g_per_kwh / 3.6e6);
}

/// Energy attributed to provisioned capacity beyond the backlog.
inline double energy_wastage(double energy_demand, double capacity_bits_served, double backlog_bits) {
  if (capacity_bits_served <= 0.0) return 0.0;
  return energy_demand * std::max(0.0, capacity_bits_served - backlog_bits) / capacity_bits_served;
}

/// Poisson draw: Knuth's multiplication method below 30, rounded normal
/// approximation at and above.
inline std::int64_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = rng.uniform();
    while (p > limit) {
      ++k;
      p *= rng.uniform();
    }
    return k;
  }
  const double x = std::round(mean + std::sqrt(mean) * rng.normal());
  return x < 0.0 ? 0 : static_cast<std::int64_t>(x);
}

}  // namespace caddto
