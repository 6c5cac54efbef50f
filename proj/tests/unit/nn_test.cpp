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


#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hiertune/binary_io.hpp"
#include "hiertune/error.hpp"
#include "hiertune/nn.hpp"

namespace hiertune {
namespace {

using Net = Mlp<double>;

double half_squared_error(const Net& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return 0.5 * (net.forward(x) - y).squaredNorm();
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  Net net({6, 16, 16, 3}, rng);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x(6, 5), y(3, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n01(rng);

  Net::Cache cache;
  const auto out = net.forward(x, &cache);
  const auto grads = net.backward(cache, out - y);

  std::uniform_int_distribution<Eigen::Index> pick(0, net.num_params() - 1);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = pick(rng);
    const double saved = net.param(k);
    net.param(k) = saved + h;
    const double up = half_squared_error(net, x, y);
    net.param(k) = saved - h;
    const double down = half_squared_error(net, x, y);
    net.param(k) = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = Net::grad_at(grads, k);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-3) << "parameter " << k;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Mlp, ShapeChecked) {
  std::mt19937_64 rng(1);
  Net net({4, 8, 2}, rng);
  EXPECT_EQ(net.inputs(), 4);
  EXPECT_EQ(net.outputs(), 2);
  EXPECT_EQ(net.num_params(), 4 * 8 + 8 + 8 * 2 + 2);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(3, 1)), ValidationError);
}

TEST(Mlp, SaveLoadRoundTrip) {
  std::mt19937_64 rng(4);
  Net net({5, 7, 3}, rng);
  BinaryWriter out;
  net.save(out);
  BinaryReader in(out.data());
  Net copy;
  copy.load(in);
  EXPECT_TRUE(in.done());
  EXPECT_EQ(copy, net);
  BinaryReader truncated(std::string_view(out.data()).substr(0, out.data().size() - 3));
  Net broken;
  EXPECT_THROW(broken.load(truncated), CheckpointError);
}

TEST(Adam, FitsConstantTarget) {
  std::mt19937_64 rng(8);
  Net net({3, 16, 1}, rng);
  Adam<double> opt;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 32);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 32, 0.7);
  for (int step = 0; step < 500; ++step) {
    Net::Cache cache;
    const auto out = net.forward(x, &cache);
    opt.step(net, net.backward(cache, (out - y) / 32.0), 1e-2);
  }
  EXPECT_LT((net.forward(x) - y).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_EQ(opt.steps(), 500);
}

TEST(MaskedSoftmax, Fuzz) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> logit(0.0, 5.0);
  for (int c = 0; c < 1000; ++c) {
    const int n = 1 + static_cast<int>(rng() % 40);
    Eigen::VectorXd z(n);
    std::vector<bool> valid(n);
    for (int i = 0; i < n; ++i) {
      z[i] = logit(rng);
      valid[i] = rng() % 3 != 0;
    }
    valid[rng() % n] = true;
    const auto p = masked_softmax<double>(z, valid);
    double total = 0;
    for (int i = 0; i < n; ++i) {
      if (!valid[i]) {
        EXPECT_EQ(p[i], 0.0);
      } else {
        EXPECT_GT(p[i], 0.0 - 1e-300);
        total += p[i];
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(MaskedSoftmax, LargeLogitsStayFinite) {
  Eigen::VectorXd z(3);
  z << 1000.0, 999.0, -1000.0;
  const auto p = masked_softmax<double>(z, std::vector<bool>{true, true, false});
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_THROW(masked_softmax<double>(z, std::vector<bool>{false, false, false}), NumericError);
}

}  // namespace
}  // namespace hiertune
