// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "caddto/config.hpp"
#include "caddto/rng.hpp"

namespace caddto {

using cplx = std::complex<double>;

struct Position {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
  friend bool operator==(const Position&, const Position&) = default;
};

/// Uplink channel of every user to the Z-antenna base station at the origin.
struct ChannelState {
  std::vector<std::vector<cplx>> vectors;  // [user][antenna]
  std::vector<Position> positions;
  std::vector<double> large_scale_gain;

  [[nodiscard]] std::size_t num_users() const { return vectors.size(); }
  friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

struct SinrReport {
  std::vector<double> sinr;
  std::vector<double> rate_bps;
};

/// Linear path gain v0 (d0 / d)^alpha with v0 given in dB at d0.
inline double large_scale_gain(double distance_m, const SystemConfig& c) {
  const double v0 = std::pow(10.0, c.path_loss_at_ref_db / 10.0);
  return v0 * std::pow(c.ref_distance_m / distance_m, c.path_loss_exp);
}

/// Circularly symmetric CN(0, variance) sample.
inline cplx complex_gaussian(double variance, Rng& rng) {
  const double s = std::sqrt(variance / 2.0);
  const double re = rng.normal();
  const double im = rng.normal();
  return {s * re, s * im};
}

/// J0(x). Power series for |x| <= 8, Hankel asymptotic expansion beyond.
/// Absolute error stays below 1e-8 on the whole real line.
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x <= 8.0) {
    const double q = x * x / 4.0;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= -q / (static_cast<double>(k) * k);
      sum += term;
      if (std::abs(term) < 1e-18) break;
    }
    return sum;
  }
  // P and Q accumulate the even and odd Hankel terms; stop at the smallest term.
  double p = 0.0;
  double q = 0.0;
  double a = 1.0;
  double prev = INFINITY;
  for (int k = 0; k < 100; ++k) {
    if (k > 0) a *= -((2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
    if (std::abs(a) > prev) break;
    prev = std::abs(a);
    const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
    (k % 2 == 0 ? p : q) += sign * a;
  }
  const double chi = x - std::numbers::pi / 4.0;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

/// Jakes-spectrum correlation between consecutive slots.
inline double temporal_correlation(double doppler_hz, double slot_s) {
  if (doppler_hz < 0) throw std::invalid_argument("doppler_hz must be non-negative");
  return bessel_j0(2.0 * std::numbers::pi * doppler_hz * slot_s);
}

inline double effective_correlation(const SystemConfig& c) {
  return c.doppler_hz ? temporal_correlation(*c.doppler_hz, c.slot_duration_s) : c.temporal_corr;
}

/// Folds a radius back into [guard, R] by mirror reflection.
inline double reflect_radius(double r, double guard, double radius) {
  for (int i = 0; i < 8 && (r > radius || r < guard); ++i) {
    if (r > radius) r = 2.0 * radius - r;
    if (r < guard) r = 2.0 * guard - r;
  }
  return std::clamp(r, guard, radius);
}

/// Gaussian random walk; steps leaving the annulus are reflected at its edge.
inline std::vector<Position> step_mobility(std::vector<Position> positions, const SystemConfig& c, Rng& rng) {
  for (auto& p : positions) {
    const double dx = rng.normal();
    const double dy = rng.normal();
    Position next{p.x + c.mobility_step_std_m * dx, p.y + c.mobility_step_std_m * dy};
    const double r = next.norm();
    if (r > c.cell_radius_m || r < c.guard_radius_m) {
      const double folded = reflect_radius(r, c.guard_radius_m, c.cell_radius_m);
      if (r > 0) {
        next.x *= folded / r;
        next.y *= folded / r;
      } else {
        next = {folded, 0.0};
      }
    }
    p = next;
  }
  return positions;
}

/// Users uniform over the annulus [guard, R]; v_u(0) ~ CN(0, g_u I).
inline ChannelState init_channel(const SystemConfig& c, Rng& rng) {
  const auto users = static_cast<std::size_t>(c.num_users);
  const auto z = static_cast<std::size_t>(c.num_antennas);
  ChannelState s;
  s.positions.resize(users);
  s.large_scale_gain.resize(users);
  s.vectors.assign(users, std::vector<cplx>(z));
  const double r2_lo = c.guard_radius_m * c.guard_radius_m;
  const double r2_hi = c.cell_radius_m * c.cell_radius_m;
  for (std::size_t u = 0; u < users; ++u) {
    const double r = std::sqrt(rng.uniform(r2_lo, r2_hi));
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.positions[u] = {r * std::cos(theta), r * std::sin(theta)};
  }
  for (std::size_t u = 0; u < users; ++u) {
    s.large_scale_gain[u] = large_scale_gain(std::max(s.positions[u].norm(), c.guard_radius_m), c);
    for (auto& entry : s.vectors[u]) entry = complex_gaussian(s.large_scale_gain[u], rng);
  }
  return s;
}

/// One slot of mobility followed by the Gauss-Markov update
/// v(t) = beta v(t-1) + sqrt(1 - beta^2) e(t), e ~ CN(0, g(t) I).
inline ChannelState step_channel(ChannelState s, const SystemConfig& c, Rng& rng) {
  const double beta = effective_correlation(c);
  const double innovation = std::sqrt(std::max(0.0, 1.0 - beta * beta));
  s.positions = step_mobility(std::move(s.positions), c, rng);
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    s.large_scale_gain[u] = large_scale_gain(std::max(s.positions[u].norm(), c.guard_radius_m), c);
    for (auto& entry : s.vectors[u]) {
      const cplx e = complex_gaussian(s.large_scale_gain[u], rng);
      entry = beta * entry + innovation * e;
    }
  }
  return s;
}

/// Joint uplink SINR with matched-filter combining on each user's own vector.
inline SinrReport compute_sinr(const ChannelState& s, std::span<const double> tx_powers, const SystemConfig& c) {
  const std::size_t users = s.num_users();
  if (tx_powers.size() != users) throw std::invalid_argument("compute_sinr: tx_powers size mismatch");
  SinrReport out;
  out.sinr.assign(users, 0.0);
  out.rate_bps.assign(users, 0.0);

  std::vector<double> own_norm2(users, 0.0);
  for (std::size_t u = 0; u < users; ++u) {
    for (const auto& v : s.vectors[u]) own_norm2[u] += std::norm(v);
  }
  for (std::size_t u = 0; u < users; ++u) {
    if (own_norm2[u] <= 0.0 || tx_powers[u] <= 0.0) continue;
    double interference = 0.0;
    for (std::size_t j = 0; j < users; ++j) {
      if (j == u || tx_powers[j] <= 0.0) continue;
      cplx inner{0.0, 0.0};
      for (std::size_t z = 0; z < s.vectors[u].size(); ++z) inner += std::conj(s.vectors[u][z]) * s.vectors[j][z];
      interference += tx_powers[j] * std::norm(inner) / own_norm2[u];
    }
    out.sinr[u] = tx_powers[u] * own_norm2[u] / (c.noise_power_w + interference);
    out.rate_bps[u] = c.bandwidth_hz * std::log2(1.0 + out.sinr[u]);
  }
  return out;
}

inline double offloaded_bits(double rate_bps, double slot_s) { return slot_s * rate_bps; }

}  // namespace caddto
