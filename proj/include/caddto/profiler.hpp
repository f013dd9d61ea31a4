// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caddto/baselines.hpp"
#include "caddto/config.hpp"
#include "caddto/nn/checkpoint.hpp"
#include "caddto/nn/complexity.hpp"
#include "caddto/nn/gaussian_policy.hpp"
#include "caddto/ppo/rollout.hpp"

namespace caddto::profiler {

inline nn::Complexity profile_model(const nn::GaussianPolicy& policy) {
  return nn::count_complexity(policy.trunk.layer_dims());
}

/// Complexity of the actor a config deploys, without building it.
inline nn::Complexity profile_config(const SystemConfig& c, bool centralized = false) {
  const ppo::AgentLayout layout{centralized, c.num_users};
  const auto dims = ppo::network_dims(layout.obs_dim(), c.ppo.hidden_dims, layout.act_dim());
  return nn::count_complexity(dims);
}

struct LatencyStats {
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  int iterations = 0;
};

inline LatencyStats summarize(std::vector<double> samples_ms) {
  LatencyStats s;
  s.iterations = static_cast<int>(samples_ms.size());
  if (samples_ms.empty()) return s;
  double sum = 0.0;
  for (double x : samples_ms) sum += x;
  s.mean_ms = sum / static_cast<double>(samples_ms.size());
  std::sort(samples_ms.begin(), samples_ms.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(samples_ms.size()))) - 1;
  s.p99_ms = samples_ms[std::min(idx, samples_ms.size() - 1)];
  return s;
}

/// Deterministic pseudo-random observations in [0, 1].
inline std::vector<std::vector<double>> probe_inputs(int dim, int count, std::uint64_t seed) {
  Rng rng(seed, 9000);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(count), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& v : out) {
    for (auto& x : v) x = rng.uniform();
  }
  return out;
}

// Keeps the optimizer from discarding benchmark work.
inline volatile double g_sink = 0.0;

/// Wall-clock time of one actor forward pass (mean action) on the calling
/// thread.
inline LatencyStats benchmark_latency(const nn::GaussianPolicy& policy, int iterations = 5000, int warmup = 200) {
  if (iterations < 1) throw std::invalid_argument("benchmark_latency: iterations must be >= 1");
  const auto inputs = probe_inputs(policy.obs_dim(), 64, 42);
  for (int i = 0; i < warmup; ++i) g_sink = nn::deterministic_action(policy, inputs[static_cast<std::size_t>(i) % 64])[0];
  std::vector<double> samples(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    g_sink = nn::deterministic_action(policy, inputs[static_cast<std::size_t>(i) % 64])[0];
    const auto t1 = std::chrono::steady_clock::now();
    samples[static_cast<std::size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  return summarize(std::move(samples));
}

/// Per-agent decision time when `users` agents each run the shared actor
/// on their own observation in one slot. Observations rotate through one
/// fixed pool so every user count sees the same input distribution.
inline double per_agent_latency_ms(const nn::GaussianPolicy& policy, int users, int slots = 2000, int warmup = 100) {
  if (users < 1) throw std::invalid_argument("per_agent_latency_ms: users must be >= 1");
  constexpr std::size_t kPool = 256;
  const auto inputs = probe_inputs(policy.obs_dim(), static_cast<int>(kPool), 43);
  std::size_t next = 0;
  auto one_slot = [&] {
    double acc = 0.0;
    for (int u = 0; u < users; ++u) {
      acc += nn::deterministic_action(policy, inputs[next])[0];
      next = (next + 1) % kPool;
    }
    g_sink = acc;
  };
  for (int i = 0; i < warmup; ++i) one_slot();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < slots; ++i) one_slot();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / (static_cast<double>(slots) * users);
}

/// Time of one grid-search DPP decision on random local states.
inline double benchmark_dpp_latency(const SystemConfig& c, int iterations = 2000, int warmup = 50) {
  if (iterations < 1) throw std::invalid_argument("benchmark_dpp_latency: iterations must be >= 1");
  Rng rng(c.seed, 9001);
  std::vector<DppLocalState> states(64);
  for (auto& s : states) {
    s.backlog_bits = rng.uniform() * c.buffer_capacity_bits;
    s.battery_level = rng.uniform() * c.battery_capacity;
    s.prev_sinr = rng.uniform() * c.sinr_target;
    s.prev_tx_power_w = rng.uniform() * c.max_tx_power_w;
  }
  for (int i = 0; i < warmup; ++i) g_sink = lyapunov_dpp_policy(states[static_cast<std::size_t>(i) % 64], c).tx_power_w;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iterations; ++i) g_sink = lyapunov_dpp_policy(states[static_cast<std::size_t>(i) % 64], c).tx_power_w;
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / iterations;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double slot_utilization(double latency_ms, double slot_s) {
  if (!(slot_s > 0.0)) throw std::invalid_argument("slot_utilization: slot duration must be positive");
  return 100.0 * latency_ms / (slot_s * 1000.0);
}

struct ProfileReport {
  nn::Complexity complexity;
  std::size_t checkpoint_bytes = 0;
  LatencyStats ppo;
  double dpp_mean_ms = 0.0;
  std::uint64_t dpp_candidates = 0;
  double slot_s = 0.0;

  [[nodiscard]] double utilization_percent() const { return slot_utilization(ppo.mean_ms, slot_s); }
  [[nodiscard]] double dpp_to_ppo_ratio() const { return ppo.mean_ms > 0.0 ? dpp_mean_ms / ppo.mean_ms : 0.0; }
};

inline ProfileReport profile(const nn::GaussianPolicy& actor, const SystemConfig& c, int iterations = 5000) {
  ProfileReport r;
  r.complexity = profile_model(actor);
  r.checkpoint_bytes = nn::encode_checkpoint(actor.trunk, &actor.log_std).size();
  r.ppo = benchmark_latency(actor, iterations);
  r.dpp_mean_ms = benchmark_dpp_latency(c, std::max(1, iterations / 5));
  r.dpp_candidates = dpp_complexity(c.grid_levels, 2);
  r.slot_s = c.slot_duration_s;
  return r;
}

/// Only the counts, which are deterministic; timings go in the text report.
inline std::string complexity_csv(const ProfileReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "metric,value\nparams,%llu\nmacs,%llu\nflops,%llu\nfloat32_bytes,%llu\ncheckpoint_bytes,%zu\n"
                "dpp_candidates,%llu\n",
                static_cast<unsigned long long>(r.complexity.params), static_cast<unsigned long long>(r.complexity.macs),
                static_cast<unsigned long long>(r.complexity.flops),
                static_cast<unsigned long long>(r.complexity.float32_bytes), r.checkpoint_bytes,
                static_cast<unsigned long long>(r.dpp_candidates));
  return buf;
}

inline std::string format_report(const ProfileReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "%-28s %s\n"
                "%-28s %llu (%.2f K)\n"
                "%-28s %llu (%.2f K)\n"
                "%-28s %llu (%.2f K)\n"
                "%-28s %llu (%.2f KiB)\n"
                "%-28s %zu bytes\n"
                "%-28s %.4f ms (p99 %.4f ms)\n"
                "%-28s %.4f ms (%llu candidates)\n"
                "%-28s %.2fx\n"
                "%-28s %.3f %%\n",
                "metric", "value", "params", static_cast<unsigned long long>(r.complexity.params),
                r.complexity.params / 1000.0, "macs", static_cast<unsigned long long>(r.complexity.macs),
                r.complexity.macs / 1000.0, "flops", static_cast<unsigned long long>(r.complexity.flops),
                r.complexity.flops / 1000.0, "float32_bytes", static_cast<unsigned long long>(r.complexity.float32_bytes),
                r.complexity.float32_bytes / 1024.0, "checkpoint", r.checkpoint_bytes, "ppo_latency", r.ppo.mean_ms,
                r.ppo.p99_ms, "dpp_latency", r.dpp_mean_ms, static_cast<unsigned long long>(r.dpp_candidates),
                "dpp_over_ppo", r.dpp_to_ppo_ratio(), "slot_utilization", r.utilization_percent());
  return buf;
}

}  // namespace caddto::profiler
