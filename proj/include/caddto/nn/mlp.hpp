// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caddto/rng.hpp"

namespace caddto::nn {

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Fully connected network: tanh on hidden layers, linear output.
///
/// Weights are stored out x in, so a layer computes W x + b. Batched
/// calls take column-major batches, one sample per column.
template <typename Scalar = double>
class Mlp {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
  };

  /// Layer outputs for backward: activations[0] is the input batch,
  /// activations[l + 1] the (post-activation) output of layer l.
  struct Cache {
    std::vector<Matrix> activations;
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw ShapeError("Mlp needs at least an input and an output dimension");
    for (int d : dims_) {
      if (d < 1) throw ShapeError("Mlp layer dimensions must be positive");
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
      biases_.push_back(Vector::Zero(dims_[l + 1]));
    }
  }

  /// Scaled-uniform init with variance gain^2 / fan_in; biases zero.
  static Mlp initialized(std::vector<int> layer_dims, Rng& rng, double hidden_gain = std::sqrt(2.0),
                         double output_gain = 0.01) {
    Mlp m(std::move(layer_dims));
    for (std::size_t l = 0; l < m.weights_.size(); ++l) {
      const double gain = (l + 1 == m.weights_.size()) ? output_gain : hidden_gain;
      const double bound = gain * std::sqrt(3.0 / static_cast<double>(m.dims_[l]));
      auto& w = m.weights_[l];
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    }
    return m;
  }

  [[nodiscard]] const std::vector<int>& layer_dims() const { return dims_; }
  [[nodiscard]] std::size_t num_layers() const { return weights_.size(); }
  [[nodiscard]] int input_dim() const { return dims_.front(); }
  [[nodiscard]] int output_dim() const { return dims_.back(); }

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  [[nodiscard]] const std::vector<Matrix>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Vector>& biases() const { return biases_; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  [[nodiscard]] Gradients zero_gradients() const {
    Gradients g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
      g.biases.push_back(Vector::Zero(biases_[l].size()));
    }
    return g;
  }

  /// Batched forward pass; `input` is input_dim x batch.
  Matrix forward(const Matrix& input, Cache* cache = nullptr) const {
    if (input.rows() != input_dim()) {
      throw ShapeError("Mlp::forward: expected input of length " + std::to_string(input_dim()) + ", got " +
                       std::to_string(input.rows()));
    }
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(input);
    }
    Matrix x = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * x;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
      if (cache) cache->activations.push_back(z);
      x = std::move(z);
    }
    return x;
  }

  /// Single-sample forward pass.
  Vector forward(std::span<const Scalar> input) const {
    if (static_cast<int>(input.size()) != input_dim()) {
      throw ShapeError("Mlp::forward: expected input of length " + std::to_string(input_dim()) + ", got " +
                       std::to_string(input.size()));
    }
    Vector x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Vector z = weights_[l] * x + biases_[l];
      if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
      x = std::move(z);
    }
    return x;
  }

  /// Reverse-mode gradients of sum_over_batch(<output_grad, output>).
  /// When `input_grad` is non-null it receives d/d(input).
  Gradients backward(const Cache& cache, const Matrix& output_grad, Matrix* input_grad = nullptr) const {
    if (cache.activations.size() != weights_.size() + 1) throw ShapeError("Mlp::backward: cache does not match network");
    const auto batch = cache.activations.front().cols();
    if (output_grad.rows() != output_dim() || output_grad.cols() != batch) {
      throw ShapeError("Mlp::backward: output_grad shape mismatch");
    }
    Gradients g = zero_gradients();
    Matrix delta = output_grad;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      if (l + 1 < weights_.size()) {
        const auto& a = cache.activations[l + 1];
        delta = (delta.array() * (Scalar(1) - a.array().square())).matrix();
      }
      g.weights[l].noalias() = delta * cache.activations[l].transpose();
      g.biases[l] = delta.rowwise().sum();
      if (l > 0 || input_grad) {
        Matrix prev = weights_[l].transpose() * delta;
        if (l == 0) {
          *input_grad = std::move(prev);
        } else {
          delta = std::move(prev);
        }
      }
    }
    return g;
  }

  [[nodiscard]] bool all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l) {
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    }
    return true;
  }

private:
  std::vector<int> dims_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

}  // namespace caddto::nn
