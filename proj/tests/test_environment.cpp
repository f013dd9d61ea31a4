// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "caddto/environment.hpp"

namespace caddto {
namespace {

SystemConfig cfg(int users) {
  SystemConfig c = default_config();
  c.num_users = users;
  return c;
}

std::vector<ActionVec> random_actions(std::size_t n, const SystemConfig& c, Rng& rng) {
  std::vector<ActionVec> a(n);
  for (auto& x : a) x = {rng.uniform(0.0, c.max_local_power_w), rng.uniform(0.0, c.max_tx_power_w)};
  return a;
}

TEST(Environment, ResetState) {
  const SystemConfig c = cfg(5);
  Rng rng(42, 30);
  const auto r = reset(c, rng);
  for (const auto& o : r.observations) {
    EXPECT_EQ(o.buffer_norm, 0.0);
    EXPECT_EQ(o.sinr_norm, 0.0);
  }
  for (const auto& b : r.state.batteries) EXPECT_EQ(b.level, 0.5 * c.battery_capacity);
  EXPECT_EQ(r.state.t, 0);
  Rng again(42, 30);
  EXPECT_EQ(reset(c, again).state, r.state);
}

TEST(Environment, NullDynamics) {
  SystemConfig c = cfg(3);
  c.arrival_rate_mean = 0.0;
  c.harvest_rate_mean = 0.0;
  Environment env(c, Rng(42, 31));
  env.reset();
  const std::vector<ActionVec> zero(3);
  for (int t = 0; t < c.episode_len; ++t) {
    const auto r = env.step(zero);
    for (double x : r.rewards) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(r.info.system_carbon_g, 0.0);
    for (const auto& q : env.state().queues) EXPECT_EQ(q.backlog_bits, 0.0);
    EXPECT_EQ(r.done, t + 1 == c.episode_len);
  }
}

TEST(Environment, NoServiceGrowsBuffer) {
  const SystemConfig c = cfg(2);
  Environment env(c, Rng(42, 32));
  env.reset();
  const std::vector<ActionVec> zero(2);
  double prev = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto r = env.step(zero);
    double level = 0.0;
    for (const auto& o : r.observations) level += o.buffer_norm;
    EXPECT_GE(level, prev);
    prev = level;
    if (t > 0) {
      for (double x : r.rewards) EXPECT_LT(x, 0.0);
    }
  }
  EXPECT_GT(prev, 0.0);
}

TEST(Environment, RejectsOutOfRangeActions) {
  const SystemConfig c = cfg(2);
  Environment env(c, Rng(42, 33));
  env.reset();
  std::vector<ActionVec> a{{0.0, 0.0}, {2.5, 0.0}};
  EXPECT_THROW(env.step(a), std::invalid_argument);
  a[1] = {0.0, -0.1};
  EXPECT_THROW(env.step(a), std::invalid_argument);
  a[1] = {NAN, 0.0};
  EXPECT_THROW(env.step(a), std::invalid_argument);
  std::vector<ActionVec> short_list{{0.0, 0.0}};
  EXPECT_THROW(env.step(short_list), std::invalid_argument);
}

TEST(Environment, BuildObservation) {
  const SystemConfig c = default_config();
  EXPECT_EQ(build_observation({c.buffer_capacity_bits, c.buffer_capacity_bits}, 0.0, 0.0, c).buffer_norm, 1.0);
  EXPECT_EQ(build_observation({0.0, c.buffer_capacity_bits}, 0.0, 2.0 * c.sinr_target, c).sinr_norm, 1.0);
  EXPECT_EQ(build_observation({0.0, c.buffer_capacity_bits}, 0.0, 0.0, c).harvest_norm, 0.0);
  EXPECT_EQ(build_observation({0.0, c.buffer_capacity_bits}, 12.0, 0.0, c).harvest_norm, 1.0);
  EXPECT_DOUBLE_EQ(build_observation({0.0, c.buffer_capacity_bits}, 2.0, 25.0, c).harvest_norm, 0.4);
  EXPECT_DOUBLE_EQ(build_observation({0.0, c.buffer_capacity_bits}, 2.0, 25.0, c).sinr_norm, 0.25);
}

TEST(Environment, RewardExamples) {
  const SystemConfig c = default_config();
  EXPECT_EQ(compute_reward(0.0, 0.0, 0.0, 0.0, c), 0.0);
  EXPECT_DOUBLE_EQ(compute_reward(1.0, 0.0, 0.0, 0.0, c), -1.0 / 3.0);
  const double max_carbon = reference_carbon(c);
  EXPECT_DOUBLE_EQ(compute_reward(1.0, max_carbon, c.buffer_capacity_bits, c.max_energy_demand(), c), -4.0 / 3.0);
  // Beyond the references the terms saturate.
  EXPECT_DOUBLE_EQ(compute_reward(1.0, 10 * max_carbon, 10 * c.buffer_capacity_bits, 10.0, c), -4.0 / 3.0);
}

TEST(Environment, ReferenceCarbonFromFormulas) {
  const SystemConfig c = default_config();
  // MEC draw at the SINR target: kappa N (delta W log2(1 + 100)) / delta.
  const double p_mec = 1e-9 * 300.0 * 1e6 * std::log2(101.0);
  EXPECT_NEAR(reference_mec_power(c), p_mec, 1e-12);
  EXPECT_NEAR(reference_carbon(c), (4.0 + p_mec) * 700.0 / 3.6e6, 1e-15);
}

TEST(Environment, LongTermOverhead) {
  const SystemConfig c = default_config();
  EXPECT_THROW((void)long_term_overhead({}, c), std::invalid_argument);

  std::vector<StepInfo> zeros(4, StepInfo{0, std::vector<UserSlot>(2), 0.0});
  for (double g : long_term_overhead(zeros, c)) EXPECT_EQ(g, 0.0);

  // Slot overheads 0.2 (buffer only) and 0.4 (buffer plus wastage).
  std::vector<StepInfo> two(2, StepInfo{0, std::vector<UserSlot>(1), 0.0});
  two[0].users[0].backlog_after = 0.6 * c.buffer_capacity_bits;
  two[1].users[0].backlog_after = 0.6 * c.buffer_capacity_bits;
  two[1].users[0].wastage = 0.6 * c.max_energy_demand();
  EXPECT_NEAR(long_term_overhead(two, c)[0], 0.3, 1e-15);

  std::vector<StepInfo> constant(7, StepInfo{0, std::vector<UserSlot>(1), 0.0});
  for (auto& s : constant) s.users[0].backlog_after = 0.3 * c.buffer_capacity_bits;
  EXPECT_NEAR(long_term_overhead(constant, c)[0], 0.1, 1e-15);
}

TEST(Environment, DeterministicTrajectories) {
  const SystemConfig c = cfg(4);
  Rng actions_a(42, 34);
  Rng actions_b(42, 34);
  Environment a(c, Rng(42, 35));
  Environment b(c, Rng(42, 35));
  a.reset();
  b.reset();
  for (int t = 0; t < 250; ++t) {
    const auto ra = a.step(random_actions(4, c, actions_a));
    const auto rb = b.step(random_actions(4, c, actions_b));
    ASSERT_EQ(ra.rewards, rb.rewards);
    ASSERT_EQ(ra.observations, rb.observations);
    ASSERT_EQ(a.state(), b.state());
    if (ra.done) {
      a.reset();
      b.reset();
    }
  }
}

// Hand-composed chain of channel and device operations, replaying the
// environment's documented RNG draw order.
TEST(Environment, FiveSlotOracle) {
  const SystemConfig c = cfg(3);
  Rng env_rng(42, 36);
  Rng oracle_rng(42, 36);
  Rng action_rng(7, 0);
  auto [state, obs] = reset(c, env_rng);

  ChannelState ch = init_channel(c, oracle_rng);
  std::vector<double> harvest(3);
  for (auto& h : harvest) h = static_cast<double>(sample_poisson(c.harvest_rate_mean, oracle_rng));
  std::vector<double> backlog(3, 0.0);
  std::vector<double> battery(3, 0.5 * c.battery_capacity);

  for (int t = 0; t < 5; ++t) {
    const auto actions = random_actions(3, c, action_rng);
    const StepResult r = step(state, actions, c, env_rng);

    const std::vector<double> tx{actions[0].tx_power_w, actions[1].tx_power_w, actions[2].tx_power_w};
    const SinrReport link = compute_sinr(ch, tx, c);
    std::vector<double> arrivals(3);
    for (auto& a : arrivals) a = static_cast<double>(sample_poisson(c.arrival_rate_mean, oracle_rng)) * c.arrival_unit_bits;
    double system_carbon = 0.0;
    for (std::size_t u = 0; u < 3; ++u) {
      const double dl = c.slot_duration_s * std::cbrt(actions[u].local_power_w / c.switching_cap) / c.cycles_per_bit;
      const double d_o = c.slot_duration_s * (c.bandwidth_hz * std::log2(1.0 + link.sinr[u]));
      const auto q = queue_step({backlog[u], c.buffer_capacity_bits}, dl, d_o, arrivals[u]);
      const double demand = actions[u].local_power_w + actions[u].tx_power_w;
      const double g = green_fraction(battery[u], demand);
      const double p_mec = c.mec_energy_per_cycle_j * c.cycles_per_bit * d_o / c.slot_duration_s;
      const double e_grid = demand * (1.0 - g) + p_mec;
      const double co2 = e_grid * (c.carbon_factor_g_per_kwh / 3.6e6);
      const double waste = (dl + d_o) > 0 ? demand * std::max(0.0, dl + d_o - backlog[u]) / (dl + d_o) : 0.0;
      const double reward = compute_reward(q.next_backlog_bits / c.buffer_capacity_bits, co2, q.overflow_bits, waste, c);

      const auto& got = r.info.users[u];
      EXPECT_EQ(got.local_bits, dl);
      EXPECT_EQ(got.offloaded_bits, d_o);
      EXPECT_EQ(got.sinr, link.sinr[u]);
      EXPECT_EQ(got.drained_bits, q.drained_bits);
      EXPECT_EQ(got.overflow_bits, q.overflow_bits);
      EXPECT_EQ(got.backlog_after, q.next_backlog_bits);
      EXPECT_EQ(got.green_fraction, g);
      EXPECT_EQ(got.grid_energy, e_grid);
      EXPECT_EQ(got.carbon_g, co2);
      EXPECT_EQ(got.wastage, waste);
      EXPECT_EQ(r.rewards[u], reward);

      battery[u] = std::min(std::max(battery[u] - demand * g, 0.0) + harvest[u], c.battery_capacity);
      EXPECT_EQ(state.batteries[u].level, battery[u]);
      backlog[u] = q.next_backlog_bits;
      system_carbon += co2;
    }
    EXPECT_EQ(r.info.system_carbon_g, system_carbon);
    for (auto& h : harvest) h = static_cast<double>(sample_poisson(c.harvest_rate_mean, oracle_rng));
    ch = step_channel(ch, c, oracle_rng);
    EXPECT_EQ(state.channel, ch);
    for (std::size_t u = 0; u < 3; ++u) {
      EXPECT_EQ(r.observations[u], build_observation({backlog[u], c.buffer_capacity_bits}, harvest[u], link.sinr[u], c));
    }
  }
}

TEST(Environment, OffloadMatchesOracleWithStubChannel) {
  SystemConfig c = cfg(1);
  c.num_antennas = 1;
  c.temporal_corr = 1.0;
  c.mobility_step_std_m = 0.0;
  Rng rng(42, 37);
  auto [state, obs] = reset(c, rng);
  state.channel.vectors[0][0] = {1e-4, 0.0};
  const std::vector<ActionVec> a{{0.0, 1.0}};
  const auto r = step(state, a, c, rng);
  const double sinr = 1.0 * 1e-8 / c.noise_power_w;
  EXPECT_EQ(r.info.users[0].offloaded_bits, offloaded_bits(c.bandwidth_hz * std::log2(1.0 + sinr), c.slot_duration_s));
}

TEST(Environment, PhysicsInvariantsRandomized) {
  SystemConfig c = cfg(4);
  Rng action_rng(42, 38);
  Environment env(c, Rng(42, 39));
  env.reset();
  const auto& w = c.reward_weights;
  for (int t = 0; t < 10000; ++t) {
    const auto before = env.state();
    const auto r = env.step(random_actions(4, c, action_rng));
    double sum_carbon = 0.0;
    for (std::size_t u = 0; u < 4; ++u) {
      const auto& s = r.info.users[u];
      ASSERT_EQ(s.arrivals_bits - s.drained_bits - s.overflow_bits, s.backlog_after - before.queues[u].backlog_bits);
      ASSERT_GE(s.battery_after, 0.0);
      ASSERT_LE(s.battery_after, c.battery_capacity);
      ASSERT_LE(r.rewards[u], 0.0);
      ASSERT_GE(r.rewards[u], -(w[0] + w[1] + 2 * w[2]) - 1e-15);
      sum_carbon += s.carbon_g;
    }
    ASSERT_DOUBLE_EQ(r.info.system_carbon_g, sum_carbon);
    for (const auto& o : r.observations) {
      for (double x : o.as_array()) {
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 1.0);
      }
    }
    if (r.done) env.reset();
  }
}

TEST(Environment, ZeroGridWhenGreenAndNoOffload) {
  SystemConfig c = cfg(2);
  c.harvest_rate_mean = 10.0;
  c.battery_capacity = 1000.0;
  c.initial_battery_fraction = 1.0;
  Environment env(c, Rng(42, 40));
  env.reset();
  const std::vector<ActionVec> a{{1.0, 0.0}, {2.0, 0.0}};
  for (int t = 0; t < 100; ++t) {
    const auto r = env.step(a);
    for (const auto& s : r.info.users) {
      ASSERT_EQ(s.green_fraction, 1.0);
      ASSERT_EQ(s.carbon_g, 0.0);
    }
  }
}

TEST(Environment, TraceCsvShape) {
  const SystemConfig c = cfg(2);
  Environment env(c, Rng(42, 41));
  env.reset();
  std::ostringstream os;
  write_trace_header(os);
  Rng ar(1, 1);
  for (int t = 0; t < 3; ++t) write_trace_rows(os, env.step(random_actions(2, c, ar)).info);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, kTraceHeader);
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 13);
  }
  EXPECT_EQ(rows, 6);
}

}  // namespace
}  // namespace caddto
