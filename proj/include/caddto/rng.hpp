// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace caddto {

/// Seeded random stream used by every stochastic component.
///
/// Streams are derived from a (seed, stream id) pair so that independent
/// simulation runs, environments, and samplers never share state. Two
/// streams built from the same pair produce identical sequences.
class Rng {
public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 42, std::uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9E3779B9u};
    engine_.seed(seq);
    normal_ = std::normal_distribution<double>(0.0, 1.0);
    key_ = seed * 0x9E3779B97F4A7C15ULL + stream;
  }

  /// Child stream keyed on this stream's (seed, stream) pair. Does not
  /// advance this stream.
  [[nodiscard]] Rng fork(std::uint64_t child) const { return Rng(key_ ^ 0xD1B54A32D192ED03ULL, child); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  engine_type& engine() { return engine_; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.normal_ == b.normal_;
  }

private:
  engine_type engine_;
  std::normal_distribution<double> normal_;
  std::uint64_t key_ = 0;
};

}  // namespace caddto
