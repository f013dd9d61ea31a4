// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

namespace caddto::nn {

struct Complexity {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
  std::uint64_t float32_bytes = 0;

  friend bool operator==(const Complexity&, const Complexity&) = default;
};

/// Dense-stack inference cost. A layer contributes out*in MACs (biases are
/// not counted) and out*in + out parameters; one MAC is two FLOPs.
inline Complexity count_complexity(std::span<const int> layer_dims) {
  if (layer_dims.size() < 2) throw std::invalid_argument("count_complexity: need at least two dims");
  Complexity c;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = static_cast<std::uint64_t>(layer_dims[l]);
    const auto out = static_cast<std::uint64_t>(layer_dims[l + 1]);
    c.params += out * in + out;
    c.macs += out * in;
  }
  c.flops = 2 * c.macs;
  c.float32_bytes = 4 * c.params;
  return c;
}

}  // namespace caddto::nn
