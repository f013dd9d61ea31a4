// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "caddto/config.hpp"

namespace caddto {
namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("caddto_cfg_" + name);
  std::ofstream(p) << text;
  return p;
}

TEST(Config, DefaultsMatchTable) {
  const SystemConfig c = default_config();
  EXPECT_EQ(c.slot_duration_s, 0.01);
  EXPECT_EQ(c.ppo.clip, 0.2);
  for (double w : c.reward_weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.bandwidth_hz, 1e6);
  EXPECT_EQ(c.noise_power_w, 1e-12);
  EXPECT_EQ(c.path_loss_exp, 2.0);
  EXPECT_EQ(c.path_loss_at_ref_db, -30.0);
  EXPECT_EQ(c.temporal_corr, 0.95);
  EXPECT_EQ(c.max_tx_power_w, 2.0);
  EXPECT_EQ(c.max_local_power_w, 2.0);
  EXPECT_EQ(c.cycles_per_bit, 300.0);
  EXPECT_EQ(c.switching_cap, 1e-27);
  EXPECT_EQ(c.carbon_factor_g_per_kwh, 700.0);
  EXPECT_EQ(c.ppo.learning_rate, 3e-4);
  EXPECT_EQ(c.ppo.gamma, 0.99);
  EXPECT_EQ(c.ppo.gae_lambda, 0.95);
  EXPECT_EQ(c.ppo.minibatch, 128);
  EXPECT_EQ(c.ppo.n_steps, 2048);
  EXPECT_EQ(c.ppo.epochs_per_update, 10);
  EXPECT_EQ(c.ppo.hidden_dims, (std::vector<int>{128, 128}));
  EXPECT_EQ(c.episode_len, 100);
  EXPECT_EQ(c.grid_levels, 10);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, FileOverridesNumUsers) {
  const auto p = temp_file("users.json", R"({"num_users": 50})");
  EXPECT_EQ(load_config(p.string()).num_users, 50);
}

TEST(Config, ClipOutOfRangeIsRejected) {
  const auto p = temp_file("clip.json", R"({"clip": 1.5})");
  try {
    (void)load_config(p.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("clip out of range"), std::string::npos);
  }
}

TEST(Config, EmptyFileIsDefault) {
  const auto p = temp_file("empty.json", "");
  EXPECT_EQ(load_config(p.string()), default_config());
  const auto q = temp_file("blank.json", "  \n\t\n");
  EXPECT_EQ(load_config(q.string()), default_config());
}

TEST(Config, RoundTripThroughFile) {
  SystemConfig c = default_config();
  c.num_users = 7;
  c.doppler_hz = 12.5;
  c.reward_weights = {0.2, 0.5, 0.3};
  c.ppo.hidden_dims = {64, 32, 16};
  const auto p = temp_file("rt.json", write_config(c));
  EXPECT_EQ(load_config(p.string()), c);
  const auto q = temp_file("rt_default.json", write_config(default_config()));
  EXPECT_EQ(load_config(q.string()), default_config());
}

TEST(Config, ParseErrorReportsLine) {
  try {
    (void)parse_config("{\n  \"num_users\": 3,\n  \"clip\": ,\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyIsError) {
  EXPECT_THROW((void)parse_config(R"({"num_user": 3})"), ConfigError);
}

TEST(Config, WrongTypeNamesField) {
  try {
    (void)parse_config(R"({"num_users": "many"})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("num_users"), std::string::npos);
  }
}

TEST(Config, ValidationNamesField) {
  auto expect_msg = [](const std::string& json, const std::string& needle) {
    try {
      (void)parse_config(json);
      ADD_FAILURE() << "no error for " << json;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_msg(R"({"temporal_corr": 1.2})", "temporal_corr");
  expect_msg(R"({"max_tx_power_w": 0})", "max_tx_power_w");
  expect_msg(R"({"reward_weights": [0.5, 1.5, 0]})", "reward_weights");
  expect_msg(R"({"buffer_capacity_bits": 30000})", "buffer_capacity_bits");
  expect_msg(R"({"clip": 0})", "clip");
  expect_msg(R"({"battery_capacity": -1})", "battery_capacity");
}

TEST(Config, OverrideParsesJsonValues) {
  SystemConfig c = apply_override(default_config(), "num_users=3");
  EXPECT_EQ(c.num_users, 3);
  c = apply_override(c, "hidden_dims=[32,32]");
  EXPECT_EQ(c.ppo.hidden_dims, (std::vector<int>{32, 32}));
  c = apply_override(c, "doppler_hz=10");
  ASSERT_TRUE(c.doppler_hz);
  EXPECT_EQ(*c.doppler_hz, 10.0);
  c = apply_override(c, "doppler_hz=null");
  EXPECT_FALSE(c.doppler_hz);
  EXPECT_THROW((void)apply_override(c, "noequals"), ConfigError);
  EXPECT_THROW((void)apply_override(c, "clip=2"), ConfigError);
}

TEST(Config, EqualSeedsGiveIdenticalStreams) {
  SystemConfig a = default_config();
  SystemConfig b = default_config();
  Rng ra = a.rng_stream(3);
  Rng rb = b.rng_stream(3);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(ra.engine()(), rb.engine()());
    ASSERT_EQ(ra.normal(), rb.normal());
  }
  Rng rc = a.rng_stream(4);
  Rng rd = a.rng_stream(3);
  EXPECT_NE(rc.engine()(), rd.engine()());
  b.seed = 43;
  Rng re = b.rng_stream(3);
  Rng rf = a.rng_stream(3);
  EXPECT_NE(re.engine()(), rf.engine()());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1, 2);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, ForkIsDeterministicAndDoesNotAdvanceParent) {
  Rng a(9, 1);
  Rng b(9, 1);
  Rng fa = a.fork(5);
  EXPECT_EQ(a, b);
  Rng fb = b.fork(5);
  EXPECT_EQ(fa.engine()(), fb.engine()());
  Rng other = a.fork(6);
  Rng again = b.fork(5);
  EXPECT_NE(other.engine()(), again.engine()());
}

}  // namespace
}  // namespace caddto
