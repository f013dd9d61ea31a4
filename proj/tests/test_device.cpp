// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "caddto/device.hpp"

namespace caddto {
namespace {

TEST(Device, CpuSpeed) {
  EXPECT_EQ(cpu_speed(0.0, 1e-27), 0.0);
  EXPECT_NEAR(cpu_speed(1.0, 1e-27), 1e9, 1e-3);
  EXPECT_NEAR(cpu_speed(2.0, 1e-27), 1.259921e9, 1e3);
}

TEST(Device, CpuPowerRoundTrip) {
  for (double p = 0.0; p <= 2.0; p += 0.01) {
    const double back = cpu_power(cpu_speed(p, 1e-27), 1e-27);
    EXPECT_NEAR(back, p, 1e-12 * std::max(p, 1e-300));
  }
}

TEST(Device, LocalBits) {
  EXPECT_NEAR(local_bits(1e9, 0.01, 300.0), 33333.333333, 1e-5);
  EXPECT_EQ(local_bits(0.0, 0.01, 300.0), 0.0);
  EXPECT_NEAR(local_bits(1.259921e9, 0.01, 300.0), 41997.4, 0.05);
}

TEST(Device, MecPower) {
  EXPECT_EQ(mec_power(0.0, 300.0, 1e-9, 0.01), 0.0);
  EXPECT_NEAR(mec_power(10000.0, 300.0, 1e-9, 0.01), 0.3, 1e-15);
  EXPECT_NEAR(mec_power(40000.0, 300.0, 1e-9, 0.01), 1.2, 1e-15);
}

TEST(Device, QueueStepExamples) {
  auto s = queue_step({100.0, 1e9}, 30.0, 50.0, 20.0);
  EXPECT_EQ(s.remaining_bits, 20.0);
  EXPECT_EQ(s.next_backlog_bits, 40.0);
  EXPECT_EQ(s.overflow_bits, 0.0);
  EXPECT_EQ(s.drained_bits, 80.0);

  s = queue_step({0.0, 1e9}, 0.0, 0.0, 0.0);
  EXPECT_EQ(s.remaining_bits, 0.0);
  EXPECT_EQ(s.next_backlog_bits, 0.0);
  EXPECT_EQ(s.overflow_bits, 0.0);
  EXPECT_EQ(s.drained_bits, 0.0);

  s = queue_step({100.0, 120.0}, 0.0, 0.0, 50.0);
  EXPECT_EQ(s.next_backlog_bits, 120.0);
  EXPECT_EQ(s.overflow_bits, 30.0);
}

TEST(Device, QueueServesWholeBits) {
  const auto s = queue_step({100.0, 1e9}, 30.4, 50.9, 0.0);
  EXPECT_EQ(s.drained_bits, 81.0);
  EXPECT_EQ(s.remaining_bits, 19.0);
  const auto t = queue_step({100.0, 1e9}, 0.3, 0.6, 0.0);
  EXPECT_EQ(t.drained_bits, 0.0);
  EXPECT_EQ(t.next_backlog_bits, 100.0);
}

TEST(Device, BitConservation) {
  Rng rng(42, 20);
  for (int i = 0; i < 100000; ++i) {
    // Whole-bit backlogs and arrivals; service capacities are fractional.
    const double cap = std::floor(rng.uniform(1e3, 2e5));
    const TaskQueue q{std::floor(rng.uniform(0.0, cap)), cap};
    const double dl = rng.uniform(0.0, 5e4);
    const double d_o = rng.uniform(0.0, 5e4);
    const double a = std::floor(rng.uniform(0.0, 1e5));
    const auto s = queue_step(q, dl, d_o, a);
    ASSERT_EQ(a - s.drained_bits - s.overflow_bits, s.next_backlog_bits - q.backlog_bits);
    ASSERT_GE(s.next_backlog_bits, 0.0);
    ASSERT_LE(s.next_backlog_bits, cap);
  }
}

TEST(Device, GreenFraction) {
  EXPECT_EQ(green_fraction(2.0, 4.0), 0.5);
  EXPECT_EQ(green_fraction(5.0, 4.0), 1.0);
  EXPECT_EQ(green_fraction(4.0, 4.0), 1.0);
  EXPECT_EQ(green_fraction(0.0, 0.0), 1.0);
  EXPECT_EQ(green_fraction(3.0, 0.0), 1.0);
}

TEST(Device, BatteryStep) {
  EXPECT_EQ(battery_step({2.0, 10.0}, 4.0, 0.5, 1.0).level, 1.0);
  EXPECT_EQ(battery_step({3.5, 10.0}, 0.0, 1.0, 0.0).level, 3.5);
  EXPECT_EQ(battery_step({9.0, 10.0}, 0.0, 1.0, 5.0).level, 10.0);
}

TEST(Device, BatteryStaysInRange) {
  Rng rng(42, 21);
  Battery b{5.0, 10.0};
  for (int i = 0; i < 100000; ++i) {
    const double demand = rng.uniform(0.0, 4.0);
    const double g = green_fraction(b.level, demand);
    b = battery_step(b, demand, g, static_cast<double>(sample_poisson(2.0, rng)));
    ASSERT_GE(b.level, 0.0);
    ASSERT_LE(b.level, 10.0);
  }
}

TEST(Device, GridEnergy) {
  EXPECT_EQ(grid_energy(4.0, 1.0, 0.0), 0.0);
  EXPECT_NEAR(grid_energy(4.0, 0.5, 1.2), 3.2, 1e-15);
  EXPECT_EQ(grid_energy(0.0, 1.0, 0.3), 0.3);
}

TEST(Device, Carbon) {
  EXPECT_EQ(carbon(0.0, 700.0), 0.0);
  EXPECT_NEAR(carbon(1.0, 700.0), 1.9444e-4, 1e-8);
  EXPECT_NEAR(carbon(3.2, 700.0), 6.222e-4, 1e-7);
}

TEST(Device, CarbonMonotonicity) {
  Rng rng(42, 22);
  for (int i = 0; i < 10000; ++i) {
    const double d = rng.uniform(0.0, 4.0);
    const double g = rng.uniform();
    const double m = rng.uniform(0.0, 2.0);
    const double base = carbon(grid_energy(d, g, m), 700.0);
    EXPECT_GE(carbon(grid_energy(d + 0.1, g, m), 700.0), base);
    EXPECT_GE(carbon(grid_energy(d, g, m + 0.1), 700.0), base);
    EXPECT_LE(carbon(grid_energy(d, std::min(1.0, g + 0.1), m), 700.0), base);
  }
}

TEST(Device, EnergyWastage) {
  EXPECT_EQ(energy_wastage(4.0, 100.0, 100.0), 0.0);
  EXPECT_NEAR(energy_wastage(4.0, 100.0, 60.0), 1.6, 1e-15);
  EXPECT_EQ(energy_wastage(4.0, 0.0, 60.0), 0.0);
  Rng rng(42, 23);
  for (int i = 0; i < 1000; ++i) {
    const double b = rng.uniform(0.0, 1e5);
    EXPECT_EQ(energy_wastage(rng.uniform(0.0, 4.0), rng.uniform(0.0, b), b), 0.0);
  }
}

TEST(Device, PoissonZeroMean) {
  Rng rng(42, 24);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_poisson(0.0, rng), 0);
}

TEST(Device, PoissonMoments) {
  Rng rng(42, 25);
  const int n = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<double>(sample_poisson(4.0, rng));
    sum += k;
    sq += k * k;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_GE(mean, 3.99);
  EXPECT_LE(mean, 4.01);
  EXPECT_GE(var, 3.95);
  EXPECT_LE(var, 4.05);
}

TEST(Device, PoissonLargeMeanApproximation) {
  Rng rng(42, 26);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = sample_poisson(50.0, rng);
    ASSERT_GE(k, 0);
    sum += static_cast<double>(k);
  }
  EXPECT_NEAR(sum / n, 50.0, 0.1);
}

}  // namespace
}  // namespace caddto
