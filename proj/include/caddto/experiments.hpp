// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "caddto/baselines.hpp"
#include "caddto/config.hpp"
#include "caddto/environment.hpp"
#include "caddto/nn/gaussian_policy.hpp"
#include "caddto/ppo/rollout.hpp"

namespace caddto {

/// Joint decision for all users from the full environment state. Rule
/// based and decentralized learned policies only read their own user's
/// observation; the DPP controller reads its user's queue and battery.
using JointPolicy =
    std::function<std::vector<ActionVec>(const EnvState&, std::span<const Observation>, Rng&)>;

inline JointPolicy make_rule_policy(PolicyKind kind, const SystemConfig& c) {
  switch (kind) {
    case PolicyKind::Greedy:
    case PolicyKind::LocalOnly:
    case PolicyKind::OffloadOnly:
      return [kind, c](const EnvState&, std::span<const Observation> obs, Rng&) {
        std::vector<ActionVec> a(obs.size());
        for (std::size_t u = 0; u < obs.size(); ++u) {
          a[u] = kind == PolicyKind::Greedy      ? greedy_policy(obs[u], c)
                 : kind == PolicyKind::LocalOnly ? local_only_policy(obs[u], c)
                                                 : offload_only_policy(obs[u], c);
        }
        return a;
      };
    case PolicyKind::LyapunovDpp:
      return [c](const EnvState& s, std::span<const Observation> obs, Rng&) {
        std::vector<ActionVec> a(obs.size());
        for (std::size_t u = 0; u < obs.size(); ++u) a[u] = lyapunov_dpp_policy(dpp_local_state(s, u), c);
        return a;
      };
    default: throw std::invalid_argument("make_rule_policy: learned policy kinds need trained networks");
  }
}

/// Shared actor applied independently to each user's observation.
inline JointPolicy make_learned_policy(std::shared_ptr<const nn::GaussianPolicy> actor, bool centralized,
                                       bool stochastic) {
  return [actor = std::move(actor), centralized, stochastic](const EnvState&, std::span<const Observation> obs,
                                                              Rng& rng) {
    const ppo::AgentLayout layout{centralized, static_cast<int>(obs.size())};
    const Eigen::MatrixXd m = layout.agent_observations(obs);
    if (m.rows() != actor->obs_dim()) throw std::invalid_argument("learned policy: observation size mismatch");
    Eigen::MatrixXd actions(layout.act_dim(), layout.agents());
    for (int a = 0; a < layout.agents(); ++a) {
      const std::span<const double> o(m.col(a).data(), static_cast<std::size_t>(m.rows()));
      const auto act = stochastic ? nn::sample_action(*actor, o, rng).action : nn::deterministic_action(*actor, o);
      for (int j = 0; j < layout.act_dim(); ++j) actions(j, a) = act[static_cast<std::size_t>(j)];
    }
    return layout.user_actions(actions);
  };
}

// ---------------------------------------------------------------------------

enum class Metric { Throughput, CarbonTotal, CarbonIntensity, Overflow, Utility, GreenFraction };
inline constexpr std::size_t kNumMetrics = 6;
inline constexpr std::array<const char*, kNumMetrics> kMetricNames{
    "throughput_bits_per_slot", "carbon_g_total", "carbon_intensity_g_per_bit",
    "overflow_bits_per_slot",   "utility",        "mean_green_fraction"};

/// Outcome of one seeded evaluation run.
struct MetricsRecord {
  PolicyKind policy = PolicyKind::Greedy;
  std::string sweep_var = "none";
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  double throughput_bits_per_slot = 0.0;
  double carbon_g_total = 0.0;
  double carbon_intensity_g_per_bit = 0.0;
  double overflow_bits_per_slot = 0.0;
  double utility = 0.0;
  double mean_green_fraction = 0.0;
  double bits_total = 0.0;
  long long slots = 0;

  [[nodiscard]] double metric(Metric m) const {
    switch (m) {
      case Metric::Throughput: return throughput_bits_per_slot;
      case Metric::CarbonTotal: return carbon_g_total;
      case Metric::CarbonIntensity: return carbon_intensity_g_per_bit;
      case Metric::Overflow: return overflow_bits_per_slot;
      case Metric::Utility: return utility;
      case Metric::GreenFraction: return mean_green_fraction;
    }
    return 0.0;
  }
};

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;
  friend bool operator==(const MetricStat&, const MetricStat&) = default;
};

/// Mean and sample standard deviation of each metric over n runs.
struct AggregateRecord {
  PolicyKind policy = PolicyKind::Greedy;
  std::string sweep_var = "none";
  double sweep_value = 0.0;
  std::uint64_t seed_group = 0;
  std::array<MetricStat, kNumMetrics> stats{};
  std::vector<MetricsRecord> runs;      // not serialized
  double latency_ms_per_agent = NAN;    // users sweep only; not serialized

  [[nodiscard]] const MetricStat& stat(Metric m) const { return stats[static_cast<std::size_t>(m)]; }

  /// Equality on the serialized fields.
  [[nodiscard]] bool same_table_row(const AggregateRecord& o) const {
    return policy == o.policy && sweep_var == o.sweep_var && sweep_value == o.sweep_value &&
           seed_group == o.seed_group && stats == o.stats;
  }
};

inline AggregateRecord aggregate(std::vector<MetricsRecord> runs) {
  AggregateRecord a;
  if (runs.empty()) return a;
  a.policy = runs.front().policy;
  a.sweep_var = runs.front().sweep_var;
  a.sweep_value = runs.front().sweep_value;
  const auto n = static_cast<double>(runs.size());
  for (std::size_t m = 0; m < kNumMetrics; ++m) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r.metric(static_cast<Metric>(m));
    mean /= n;
    double ss = 0.0;
    for (const auto& r : runs) {
      const double d = r.metric(static_cast<Metric>(m)) - mean;
      ss += d * d;
    }
    a.stats[m] = {mean, runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  }
  a.runs = std::move(runs);
  return a;
}

// RNG streams for evaluation runs; disjoint from the trainer's.
inline constexpr std::uint64_t kStreamEvalEnv = 5000;
inline constexpr std::uint64_t kStreamEvalPolicy = 7000;

/// One run: `episodes` consecutive episodes on a single seeded environment.
inline MetricsRecord run_episodes(PolicyKind kind, const JointPolicy& policy, const SystemConfig& c, int run_index,
                                  int episodes, std::vector<StepInfo>* history = nullptr) {
  Rng env_rng = c.rng_stream(kStreamEvalEnv + static_cast<std::uint64_t>(run_index));
  Rng policy_rng = c.rng_stream(kStreamEvalPolicy + static_cast<std::uint64_t>(run_index));
  MetricsRecord rec;
  rec.policy = kind;
  rec.seed = c.seed;
  double reward_sum = 0.0;
  double green_sum = 0.0;
  double overflow = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto [state, obs] = reset(c, env_rng);
    bool done = false;
    while (!done) {
      const auto actions = policy(state, obs, policy_rng);
      StepResult r = step(state, actions, c, env_rng);
      for (const auto& u : r.info.users) {
        rec.bits_total += u.drained_bits;
        overflow += u.overflow_bits;
        reward_sum += u.reward;
        green_sum += u.green_fraction;
      }
      rec.carbon_g_total += r.info.system_carbon_g;
      ++rec.slots;
      done = r.done;
      obs = std::move(r.observations);
      if (history) history->push_back(std::move(r.info));
    }
  }
  const auto slots = static_cast<double>(rec.slots);
  rec.throughput_bits_per_slot = rec.bits_total / slots;
  rec.carbon_intensity_g_per_bit = rec.carbon_g_total / std::max(rec.bits_total, 1.0);
  rec.overflow_bits_per_slot = overflow / slots;
  rec.utility = reward_sum / slots;
  rec.mean_green_fraction = green_sum / (slots * static_cast<double>(c.num_users));
  return rec;
}

// ---------------------------------------------------------------------------

inline unsigned worker_threads() {
  if (const char* env = std::getenv("CADDTO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..n-1) on a bounded pool; results must be written by index.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = worker_threads()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Aggregated metrics over `n_runs` independently seeded runs.
inline AggregateRecord evaluate(PolicyKind kind, const JointPolicy& policy, const SystemConfig& c, int n_runs,
                                int episodes_per_run) {
  std::vector<MetricsRecord> runs(static_cast<std::size_t>(n_runs));
  parallel_for(runs.size(), [&](std::size_t r) {
    runs[r] = run_episodes(kind, policy, c, static_cast<int>(r), episodes_per_run);
  });
  AggregateRecord a = aggregate(std::move(runs));
  a.policy = kind;
  a.seed_group = c.seed;
  return a;
}

/// Builds the policy to evaluate for a given kind and configuration.
using PolicyFactory = std::function<JointPolicy(PolicyKind, const SystemConfig&)>;

inline PolicyFactory rule_policy_factory() {
  return [](PolicyKind k, const SystemConfig& c) { return make_rule_policy(k, c); };
}

inline SystemConfig with_value(SystemConfig c, const std::string& var, double value) {
  nlohmann::json v = (var == "num_users") ? nlohmann::json(static_cast<int>(std::lround(value))) : nlohmann::json(value);
  detail::set_field(c, var, v);
  validate(c);
  return c;
}

/// Mean wall-clock time of one policy decision per user, single-threaded.
inline double per_agent_decision_ms(const JointPolicy& policy, const SystemConfig& c, int iterations = 200) {
  Rng rng = c.rng_stream(kStreamEvalEnv);
  auto [state, obs] = reset(c, rng);
  for (int i = 0; i < 10; ++i) (void)policy(state, obs, rng);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iterations; ++i) (void)policy(state, obs, rng);
  const auto t1 = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return ms / (static_cast<double>(iterations) * c.num_users);
}

struct SweepOptions {
  int n_runs = 20;
  int episodes_per_run = 10;
  bool record_latency = false;
};

/// Every (value, policy) pair; rows ordered by value, then policy order.
inline std::vector<AggregateRecord> run_sweep(const std::vector<PolicyKind>& policies, const SystemConfig& base,
                                              const std::string& var, const std::vector<double>& values,
                                              const PolicyFactory& factory, const SweepOptions& opt) {
  if (values.empty()) throw std::invalid_argument("sweep: value list is empty");
  struct Cell {
    PolicyKind kind;
    SystemConfig config;
    JointPolicy policy;
  };
  std::vector<Cell> cells;
  for (double v : values) {
    const SystemConfig c = with_value(base, var, v);
    for (PolicyKind k : policies) cells.push_back({k, c, factory(k, c)});
  }
  const auto runs = static_cast<std::size_t>(opt.n_runs);
  std::vector<MetricsRecord> results(cells.size() * runs);
  parallel_for(results.size(), [&](std::size_t i) {
    const Cell& cell = cells[i / runs];
    results[i] = run_episodes(cell.kind, cell.policy, cell.config, static_cast<int>(i % runs), opt.episodes_per_run);
  });

  std::vector<AggregateRecord> out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::vector<MetricsRecord> group(results.begin() + static_cast<std::ptrdiff_t>(k * runs),
                                     results.begin() + static_cast<std::ptrdiff_t>((k + 1) * runs));
    for (auto& r : group) {
      r.sweep_var = var;
      r.sweep_value = values[k / policies.size()];
    }
    AggregateRecord a = aggregate(std::move(group));
    a.policy = cells[k].kind;
    a.seed_group = base.seed;
    if (opt.record_latency) a.latency_ms_per_agent = per_agent_decision_ms(cells[k].policy, cells[k].config);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<AggregateRecord> sweep_arrival(const std::vector<PolicyKind>& policies, const SystemConfig& c,
                                                  const std::vector<double>& rates, const PolicyFactory& factory,
                                                  const SweepOptions& opt = {}) {
  return run_sweep(policies, c, "arrival_rate_mean", rates, factory, opt);
}

inline std::vector<AggregateRecord> sweep_energy(const std::vector<PolicyKind>& policies, const SystemConfig& c,
                                                 const std::vector<double>& rates, const PolicyFactory& factory,
                                                 const SweepOptions& opt = {}) {
  return run_sweep(policies, c, "harvest_rate_mean", rates, factory, opt);
}

inline std::vector<AggregateRecord> sweep_users(const std::vector<PolicyKind>& policies, const SystemConfig& c,
                                                const std::vector<int>& users, const PolicyFactory& factory,
                                                SweepOptions opt = {}) {
  opt.record_latency = true;
  return run_sweep(policies, c, "num_users", std::vector<double>(users.begin(), users.end()), factory, opt);
}

// ---------------------------------------------------------------------------
// CSV.

inline constexpr const char* kResultsHeader = "policy,sweep_var,sweep_value,seed_group,metric,mean,std";
inline constexpr const char* kTradeoffHeader = "policy,throughput_bits_per_slot,carbon_intensity_g_per_bit";

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_results_csv(std::ostream& os, std::span<const AggregateRecord> records) {
  os << kResultsHeader << '\n';
  for (const auto& r : records) {
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      os << policy_name(r.policy) << ',' << r.sweep_var << ',' << format_real(r.sweep_value) << ',' << r.seed_group
         << ',' << kMetricNames[m] << ',' << format_real(r.stats[m].mean) << ',' << format_real(r.stats[m].std)
         << '\n';
    }
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

/// Groups rows back into records, in first-appearance order.
inline std::vector<AggregateRecord> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) throw std::runtime_error("results CSV: bad header");
  std::vector<AggregateRecord> out;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::size_t> index;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("results CSV: expected 7 fields: " + line);
    const auto kind = parse_policy(f[0]);
    if (!kind) throw std::runtime_error("results CSV: unknown policy '" + f[0] + "'");
    const auto metric = std::find(kMetricNames.begin(), kMetricNames.end(), f[4]);
    if (metric == kMetricNames.end()) throw std::runtime_error("results CSV: unknown metric '" + f[4] + "'");
    const auto key = std::make_tuple(f[0], f[1], f[2], f[3]);
    auto it = index.find(key);
    if (it == index.end()) {
      AggregateRecord r;
      r.policy = *kind;
      r.sweep_var = f[1];
      r.sweep_value = std::stod(f[2]);
      r.seed_group = std::stoull(f[3]);
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(r));
    }
    out[it->second].stats[static_cast<std::size_t>(metric - kMetricNames.begin())] = {std::stod(f[5]),
                                                                                       std::stod(f[6])};
  }
  return out;
}

/// (policy, throughput, carbon intensity) points for a trade-off scatter.
inline std::string tradeoff_scatter(std::span<const AggregateRecord> records) {
  std::ostringstream os;
  os << kTradeoffHeader << '\n';
  for (const auto& r : records) {
    os << policy_name(r.policy) << ',' << format_real(r.stat(Metric::Throughput).mean) << ','
       << format_real(r.stat(Metric::CarbonIntensity).mean) << '\n';
  }
  return os.str();
}

}  // namespace caddto
