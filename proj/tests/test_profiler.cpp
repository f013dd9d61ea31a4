// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "caddto/ppo/rollout.hpp"
#include "caddto/profiler.hpp"

namespace caddto::profiler {
namespace {

nn::GaussianPolicy actor_with(std::vector<int> hidden) {
  SystemConfig c = default_config();
  c.ppo.hidden_dims = std::move(hidden);
  Rng rng(42, 80);
  return ppo::make_actor({false, c.num_users}, c, rng);
}

TEST(Profiler, DefaultCounts) {
  const auto actor = actor_with({128, 128});
  const auto k = profile_model(actor);
  EXPECT_EQ(k.params, 17282u);
  EXPECT_EQ(k.macs, 17024u);
  EXPECT_EQ(k.flops, 34048u);
  EXPECT_EQ(k.float32_bytes, 69128u);
  EXPECT_EQ(profile_config(default_config()).params, 17282u);
  EXPECT_EQ(profile_config(default_config(), true).params, 19850u);
}

TEST(Profiler, CentralizedGrowsWithUsers) {
  SystemConfig c = default_config();
  std::uint64_t prev = 0;
  for (int u : {1, 2, 5, 10, 20, 50}) {
    c.num_users = u;
    const auto p = profile_config(c, true).params;
    EXPECT_GT(p, prev);
    prev = p;
    EXPECT_EQ(profile_config(c, false).params, 17282u);
  }
}

TEST(SlotUtilization, Examples) {
  EXPECT_NEAR(slot_utilization(0.1457, 0.01), 1.457, 1e-12);
  EXPECT_EQ(slot_utilization(0.0, 0.01), 0.0);
  EXPECT_NEAR(slot_utilization(10.0, 0.01), 100.0, 1e-12);
  EXPECT_THROW(slot_utilization(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(slot_utilization(1.0, -0.01), std::invalid_argument);
}

TEST(Summarize, MeanAndP99) {
  std::vector<double> s(100);
  for (int i = 0; i < 100; ++i) s[static_cast<std::size_t>(i)] = i + 1;
  const auto st = summarize(s);
  EXPECT_EQ(st.iterations, 100);
  EXPECT_DOUBLE_EQ(st.mean_ms, 50.5);
  EXPECT_EQ(st.p99_ms, 99.0);
  EXPECT_EQ(summarize({}).iterations, 0);
}

TEST(Latency, ForwardPassUnderOneMillisecond) {
  const auto st = benchmark_latency(actor_with({128, 128}), 3000);
  EXPECT_GT(st.mean_ms, 0.0);
  EXPECT_LT(st.mean_ms, 1.0);
  EXPECT_GE(st.p99_ms, 0.0);
}

TEST(Latency, WiderNetworkIsSlower) {
  // Medians of several trials damp scheduler noise.
  auto median_of = [](const nn::GaussianPolicy& p) {
    std::vector<double> v;
    for (int i = 0; i < 5; ++i) v.push_back(benchmark_latency(p, 2000).mean_ms);
    std::sort(v.begin(), v.end());
    return v[2];
  };
  const double narrow = median_of(actor_with({128, 128}));
  const double wide = median_of(actor_with({512, 512}));
  EXPECT_GT(wide, narrow);
}

TEST(Latency, PerAgentIndependentOfUserCount) {
  const auto actor = actor_with({128, 128});
  std::vector<double> ratios;
  for (int trial = 0; trial < 5; ++trial) {
    const double five = per_agent_latency_ms(actor, 5, 2000);
    const double fifty = per_agent_latency_ms(actor, 50, 200);
    ratios.push_back(fifty / five);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_NEAR(ratios[2], 1.0, 0.2);
}

TEST(Latency, DppScalesQuadraticallyInGrid) {
  std::vector<double> gs{5, 10, 20, 40};
  std::vector<double> ts;
  for (double g : gs) {
    SystemConfig c = default_config();
    c.grid_levels = static_cast<int>(g);
    std::vector<double> trials;
    for (int i = 0; i < 3; ++i) trials.push_back(benchmark_dpp_latency(c, static_cast<int>(200000 / (g * g)), 20));
    std::sort(trials.begin(), trials.end());
    ts.push_back(trials[1]);
  }
  const double slope = loglog_slope(gs, ts);
  EXPECT_GE(slope, 1.8);
  EXPECT_LE(slope, 2.2);
}

TEST(LoglogSlope, ExactPowerLaw) {
  const std::vector<double> x{1, 2, 4, 8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
  EXPECT_THROW(loglog_slope(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Report, ContainsCountsAndUtilization) {
  const auto actor = actor_with({128, 128});
  const ProfileReport r = profile(actor, default_config(), 1000);
  EXPECT_EQ(r.checkpoint_bytes, 32u + 8u * 3u + 4u * (17282u + 2u));
  EXPECT_EQ(r.dpp_candidates, 100u);
  EXPECT_NEAR(r.utilization_percent(), 100.0 * r.ppo.mean_ms / 10.0, 1e-12);
  const std::string text = format_report(r);
  EXPECT_NE(text.find("17282"), std::string::npos);
  EXPECT_NE(text.find("slot_utilization"), std::string::npos);
  const std::string csv = complexity_csv(r);
  EXPECT_EQ(csv.rfind("metric,value\nparams,17282\nmacs,17024\nflops,34048\nfloat32_bytes,69128\n", 0), 0u);
  EXPECT_EQ(csv, complexity_csv(profile(actor, default_config(), 1000)));
}

}  // namespace
}  // namespace caddto::profiler
