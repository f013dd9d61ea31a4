// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "caddto/nn/mlp.hpp"

namespace caddto::nn {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one flat buffer per parameter tensor.
struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam step over matching lists of parameter and gradient
/// tensors. Moment buffers are created lazily on the first call.
inline void adam_update(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                        AdamState& state, const AdamOptions& opt) {
  if (params.size() != grads.size()) throw ShapeError("adam_update: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.size())));
      state.v.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_update: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || static_cast<Eigen::Index>(params[i].size()) != state.m[i].size()) {
      throw ShapeError("adam_update: tensor size mismatch");
    }
    const auto n = static_cast<Eigen::Index>(params[i].size());
    Eigen::Map<Eigen::ArrayXd> p(params[i].data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grads[i].data(), n);
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g.square();
    p -= opt.lr * (state.m[i] / c1) / ((state.v[i] / c2).sqrt() + opt.eps);
  }
}

/// Parameter tensor views of an Mlp, weights then biases per layer.
inline std::vector<std::span<double>> parameter_views(Mlp<double>& net) {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    out.emplace_back(net.weights()[l].data(), static_cast<std::size_t>(net.weights()[l].size()));
    out.emplace_back(net.biases()[l].data(), static_cast<std::size_t>(net.biases()[l].size()));
  }
  return out;
}

inline std::vector<std::span<const double>> gradient_views(const Mlp<double>::Gradients& g) {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    out.emplace_back(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
    out.emplace_back(g.biases[l].data(), static_cast<std::size_t>(g.biases[l].size()));
  }
  return out;
}

/// Scales gradients in place so their global L2 norm is at most max_norm.
inline void clip_global_norm(std::span<const std::span<double>> grads, double max_norm) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double x : g) s += x * x;
  }
  const double norm = std::sqrt(s);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (const auto& g : grads) {
    for (double& x : g) x *= scale;
  }
}

}  // namespace caddto::nn
