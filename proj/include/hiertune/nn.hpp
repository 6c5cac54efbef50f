// Copyright (c) 2026 The hiertune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hiertune/binary_io.hpp"
#include "hiertune/error.hpp"

namespace hiertune {

/// Fully connected network with tanh hidden layers and a linear output layer.
/// Batches are stored one sample per column.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Gradients {
    std::vector<Matrix> w;
    std::vector<Vector> b;
  };

  /// Layer activations of the last forward pass, input first.
  struct Cache {
    std::vector<Matrix> a;
  };

  Mlp() = default;

  /// `sizes` = {inputs, hidden..., outputs}. Glorot-uniform weights, zero
  /// biases; the output layer is additionally scaled by `output_scale`.
  template <typename Urbg>
  Mlp(const std::vector<int>& sizes, Urbg& rng, Scalar output_scale = Scalar(1)) {
    if (sizes.size() < 2) throw ValidationError("network needs an input and an output layer");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l];
      const int out = sizes[l + 1];
      const double limit = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> u(-limit, limit);
      Matrix w(out, in);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(u(rng));
      }
      if (l + 2 == sizes.size()) w *= output_scale;
      weights.push_back(std::move(w));
      biases.push_back(Vector::Zero(out));
    }
  }

  int inputs() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int outputs() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.rows() != inputs()) {
      throw ValidationError("network input has " + std::to_string(x.rows()) + " features, expected " +
                            std::to_string(inputs()));
    }
    if (cache) {
      cache->a.clear();
      cache->a.push_back(x);
    }
    Matrix h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Matrix z = (weights[l] * h).colwise() + biases[l];
      if (l + 1 < weights.size()) z = z.array().tanh().matrix();
      h = std::move(z);
      if (cache) cache->a.push_back(h);
    }
    return h;
  }

  /// Gradients of a loss given its derivative with respect to the outputs.
  Gradients backward(const Cache& cache, const Matrix& grad_out) const {
    Gradients g;
    g.w.resize(weights.size());
    g.b.resize(weights.size());
    Matrix delta = grad_out;
    for (std::size_t l = weights.size(); l-- > 0;) {
      g.w[l] = delta * cache.a[l].transpose();
      g.b[l] = delta.rowwise().sum();
      if (l > 0) {
        const auto& a = cache.a[l].array();
        delta = ((weights[l].transpose() * delta).array() * (Scalar(1) - a * a)).matrix();
      }
    }
    return g;
  }

  Gradients zeros() const {
    Gradients g;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      g.w.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
      g.b.push_back(Vector::Zero(biases[l].size()));
    }
    return g;
  }

  Eigen::Index num_params() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  /// Reference to the k-th scalar parameter in (weights, bias) layer order.
  Scalar& param(Eigen::Index k) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (k < weights[l].size()) return weights[l].data()[k];
      k -= weights[l].size();
      if (k < biases[l].size()) return biases[l][k];
      k -= biases[l].size();
    }
    throw ValidationError("parameter index out of range");
  }

  static Scalar grad_at(const Gradients& g, Eigen::Index k) {
    for (std::size_t l = 0; l < g.w.size(); ++l) {
      if (k < g.w[l].size()) return g.w[l].data()[k];
      k -= g.w[l].size();
      if (k < g.b[l].size()) return g.b[l][k];
      k -= g.b[l].size();
    }
    throw ValidationError("gradient index out of range");
  }

  bool finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
  }

  void save(BinaryWriter& out) const {
    out.u64(weights.size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.matrix(weights[l]);
      out.matrix(biases[l]);
    }
  }

  void load(BinaryReader& in) {
    const auto layers = in.u64();
    if (layers > 64) throw CheckpointError("implausible layer count in checkpoint");
    weights.clear();
    biases.clear();
    for (std::uint64_t l = 0; l < layers; ++l) {
      weights.push_back(in.matrix<Scalar>());
      Matrix b = in.matrix<Scalar>();
      if (b.cols() != 1 || b.rows() != weights.back().rows()) throw CheckpointError("bias shape mismatch");
      biases.push_back(b.col(0));
    }
  }

  bool operator==(const Mlp&) const = default;

  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Adaptive moment estimation with bias correction.
template <typename Scalar>
class Adam {
 public:
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  void step(Mlp<Scalar>& net, const typename Mlp<Scalar>::Gradients& g, Scalar lr) {
    if (m_.w.empty()) {
      m_ = net.zeros();
      v_ = net.zeros();
    }
    ++t_;
    const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = beta1 * m + (Scalar(1) - beta1) * grad;
      v = (beta2 * v.array() + (Scalar(1) - beta2) * grad.array().square()).matrix();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      update(net.weights[l], g.w[l], m_.w[l], v_.w[l]);
      update(net.biases[l], g.b[l], m_.b[l], v_.b[l]);
    }
  }

  std::int64_t steps() const { return t_; }

  void save(BinaryWriter& out) const {
    out.i64(t_);
    out.u64(m_.w.size());
    for (std::size_t l = 0; l < m_.w.size(); ++l) {
      out.matrix(m_.w[l]);
      out.matrix(m_.b[l]);
      out.matrix(v_.w[l]);
      out.matrix(v_.b[l]);
    }
  }

  void load(BinaryReader& in) {
    t_ = in.i64();
    const auto layers = in.u64();
    if (layers > 64) throw CheckpointError("implausible optimizer layer count");
    m_ = {};
    v_ = {};
    for (std::uint64_t l = 0; l < layers; ++l) {
      m_.w.push_back(in.matrix<Scalar>());
      m_.b.push_back(in.matrix<Scalar>().col(0));
      v_.w.push_back(in.matrix<Scalar>());
      v_.b.push_back(in.matrix<Scalar>().col(0));
    }
  }

 private:
  std::int64_t t_ = 0;
  typename Mlp<Scalar>::Gradients m_;
  typename Mlp<Scalar>::Gradients v_;
};

/// Softmax restricted to the valid entries; invalid entries get exactly 0.
template <typename Scalar, typename Mask>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> masked_softmax(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& logits,
                                                         const Mask& valid) {
  const Eigen::Index n = logits.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (valid[k]) top = std::max(top, logits[k]);
  }
  if (!std::isfinite(static_cast<double>(top))) throw NumericError("masked softmax has no valid finite entry");
  Scalar sum = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (valid[k]) {
      p[k] = std::exp(logits[k] - top);
      sum += p[k];
    }
  }
  return p / sum;
}

}  // namespace hiertune
