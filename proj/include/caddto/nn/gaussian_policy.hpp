// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "caddto/nn/mlp.hpp"
#include "caddto/rng.hpp"

namespace caddto::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian over raw actions with a tanh squash onto [0, scale].
///
/// The trunk produces the mean; log_std is a free, state-independent
/// vector. Actions are scale * (tanh(raw) + 1) / 2 per dimension.
struct GaussianPolicy {
  Mlp<double> trunk;
  Eigen::VectorXd log_std;
  Eigen::VectorXd action_scale;

  GaussianPolicy() = default;
  GaussianPolicy(Mlp<double> net, Eigen::VectorXd scale, double init_log_std = 0.0)
      : trunk(std::move(net)), log_std(Eigen::VectorXd::Constant(scale.size(), init_log_std)),
        action_scale(std::move(scale)) {
    if (trunk.output_dim() != action_scale.size()) throw ShapeError("GaussianPolicy: trunk output != action dim");
  }

  [[nodiscard]] int obs_dim() const { return trunk.input_dim(); }
  [[nodiscard]] int action_dim() const { return trunk.output_dim(); }

  void clamp_log_std() { log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

  friend bool operator==(const GaussianPolicy&, const GaussianPolicy&) = default;
};

struct SampledAction {
  std::vector<double> action;
  std::vector<double> raw;
  double log_prob = 0.0;
};

/// log(1 - tanh(x)^2), stable for large |x|.
inline double log1m_tanh2(double x) {
  const double a = std::abs(x);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

inline double squash(double raw, double scale) { return scale * 0.5 * (std::tanh(raw) + 1.0); }

/// Log density of the squashed action given its raw pre-image.
inline double squashed_log_prob(std::span<const double> raw, std::span<const double> mean,
                                const Eigen::VectorXd& log_std, const Eigen::VectorXd& scale) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double ls = log_std[static_cast<Eigen::Index>(j)];
    const double z = (raw[j] - mean[j]) * std::exp(-ls);
    lp += -0.5 * z * z - ls - half_log_2pi;
    lp -= std::log(0.5 * scale[static_cast<Eigen::Index>(j)]) + log1m_tanh2(raw[j]);
  }
  return lp;
}

inline SampledAction sample_action(const GaussianPolicy& policy, std::span<const double> observation, Rng& rng) {
  const Eigen::VectorXd mean = policy.trunk.forward(observation);
  SampledAction out;
  const auto dims = static_cast<std::size_t>(policy.action_dim());
  out.raw.resize(dims);
  out.action.resize(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.raw[j] = mean[jj] + std::exp(policy.log_std[jj]) * rng.normal();
    out.action[j] = squash(out.raw[j], policy.action_scale[jj]);
  }
  out.log_prob = squashed_log_prob(out.raw, std::span<const double>(mean.data(), dims), policy.log_std,
                                   policy.action_scale);
  return out;
}

/// Squashed mean action (evaluation mode).
inline std::vector<double> deterministic_action(const GaussianPolicy& policy, std::span<const double> observation) {
  const Eigen::VectorXd mean = policy.trunk.forward(observation);
  std::vector<double> a(static_cast<std::size_t>(mean.size()));
  for (Eigen::Index j = 0; j < mean.size(); ++j) a[static_cast<std::size_t>(j)] = squash(mean[j], policy.action_scale[j]);
  return a;
}

/// Closed-form entropy of the pre-squash Gaussian.
inline double gaussian_entropy(const Eigen::VectorXd& log_std) {
  constexpr double half_log_2pi_e = 1.41893853320467274178;
  return log_std.sum() + half_log_2pi_e * static_cast<double>(log_std.size());
}

struct ActionEvaluation {
  Eigen::VectorXd log_probs;
  double entropy = 0.0;
  Eigen::MatrixXd means;  // action_dim x batch
};

/// Log-probabilities of stored raw actions (action_dim x batch) for the
/// observations (obs_dim x batch) under the current parameters.
inline ActionEvaluation evaluate_actions(const GaussianPolicy& policy, const Eigen::MatrixXd& observations,
                                         const Eigen::MatrixXd& raw_actions,
                                         Mlp<double>::Cache* cache = nullptr) {
  if (raw_actions.rows() != policy.action_dim() || raw_actions.cols() != observations.cols()) {
    throw ShapeError("evaluate_actions: raw action batch shape mismatch");
  }
  ActionEvaluation out;
  out.means = policy.trunk.forward(observations, cache);
  const auto dims = static_cast<std::size_t>(policy.action_dim());
  out.log_probs.resize(observations.cols());
  for (Eigen::Index i = 0; i < observations.cols(); ++i) {
    out.log_probs[i] =
        squashed_log_prob(std::span<const double>(raw_actions.col(i).data(), dims),
                          std::span<const double>(out.means.col(i).data(), dims), policy.log_std, policy.action_scale);
  }
  out.entropy = gaussian_entropy(policy.log_std);
  return out;
}

}  // namespace caddto::nn
