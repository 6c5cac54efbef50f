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


#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hiertune/error.hpp"
#include "hiertune/workload.hpp"

namespace hiertune {
namespace {

const std::string kBenchmarks = std::string(HIERTUNE_SOURCE_DIR) + "/workloads/benchmarks.json";

TensorOpDef matmul(std::int64_t m, std::int64_t k, std::int64_t n, std::vector<int> consumers = {}) {
  return make_op(OpKind::MatMul, {{"M", m}, {"K", k}, {"N", n}}, std::move(consumers));
}

// Counts multiply-adds by walking the padded input with a sliding window.
double naive_conv2d_flops(int n, int h, int w, int ci, int co, int k, int stride, int pad) {
  std::int64_t macs = 0;
  for (int b = 0; b < n; ++b)
    for (int y = -pad; y + k <= h + pad; y += stride)
      for (int x = -pad; x + k <= w + pad; x += stride)
        for (int o = 0; o < co; ++o)
          for (int i = 0; i < ci; ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) ++macs;
  return 2.0 * static_cast<double>(macs);
}

TEST(FlopCount, MatMul) {
  EXPECT_EQ(flop_count(matmul(1, 1, 1)), 2.0);
  EXPECT_EQ(flop_count(matmul(128, 128, 128)), 4194304.0);
}

TEST(FlopCount, Conv2DMatchesLoopNest) {
  auto op = make_op(OpKind::Conv2D, {{"N", 1}, {"H", 56}, {"W", 56}, {"CI", 64}, {"CO", 64}, {"K", 1}});
  EXPECT_EQ(flop_count(op), naive_conv2d_flops(1, 56, 56, 64, 64, 1, 1, 0));

  auto strided = make_op(OpKind::Conv2D,
                         {{"N", 2}, {"H", 15}, {"W", 9}, {"CI", 3}, {"CO", 5}, {"K", 3}, {"stride", 2}, {"pad", 1}});
  EXPECT_EQ(flop_count(strided), naive_conv2d_flops(2, 15, 9, 3, 5, 3, 2, 1));
}

TEST(Network, GemmLargeFromFile) {
  auto net = load_network(kBenchmarks, "gemm-l");
  ASSERT_EQ(net.subgraphs.size(), 1u);
  EXPECT_EQ(net.subgraphs[0].flops, 2.0 * 1024.0 * 1024.0 * 1024.0);
}

TEST(Network, BertHasTenSubgraphs) {
  auto net = load_network(kBenchmarks, "bert-base");
  EXPECT_EQ(net.subgraphs.size(), 10u);
  for (const auto& sg : net.subgraphs) EXPECT_GT(sg.weight, 0);
}

TEST(Network, EmptySubgraphListRejected) {
  nlohmann::ordered_json j = {{"name", "empty"}, {"subgraphs", nlohmann::ordered_json::array()}};
  EXPECT_THROW(parse_network(j), ValidationError);
}

TEST(Network, JsonRoundTrip) {
  auto net = load_network(kBenchmarks, "bert-base");
  auto again = parse_network(to_json(net));
  ASSERT_EQ(again.subgraphs.size(), net.subgraphs.size());
  for (std::size_t i = 0; i < net.subgraphs.size(); ++i) {
    EXPECT_EQ(again.subgraphs[i].id, net.subgraphs[i].id);
    EXPECT_EQ(again.subgraphs[i].flops, net.subgraphs[i].flops);
    EXPECT_EQ(again.subgraphs[i].weight, net.subgraphs[i].weight);
  }
}

TEST(Network, CycleRejected) {
  EXPECT_THROW(make_subgraph("c", "c", {matmul(4, 4, 4, {1}), matmul(4, 4, 4, {0})}, 1), ValidationError);
}

TEST(Sketches, StandaloneMatMulHasThree) {
  auto sg = make_subgraph("g", "g", {matmul(64, 64, 64)}, 1);
  auto sketches = generate_sketches(sg, TargetConfig::cpu());
  ASSERT_EQ(sketches.size(), 3u);
  EXPECT_EQ(sketches[0].structure[0], NodeStructure::Tiled);
  EXPECT_EQ(sketches[1].structure[0], NodeStructure::CacheWriteThenTiled);
  EXPECT_EQ(sketches[2].structure[0], NodeStructure::RFactorThenTiled);
}

TEST(Sketches, ElementwiseWithConsumerCanInline) {
  auto ew = make_op(OpKind::Elementwise, {{"i", 64}, {"j", 64}}, {1});
  auto sg = make_subgraph("e", "e", {ew, matmul(64, 64, 64)}, 1);
  bool inlined = false;
  for (const auto& s : generate_sketches(sg, TargetConfig::cpu())) inlined |= s.structure[0] == NodeStructure::Inlined;
  EXPECT_TRUE(inlined);
}

TEST(Sketches, MatMulElementwiseGolden) {
  auto sg = make_subgraph("f", "f", {matmul(64, 64, 64, {1}), make_op(OpKind::Elementwise, {{"i", 64}, {"j", 64}})}, 1);
  std::ifstream in(std::string(HIERTUNE_SOURCE_DIR) + "/tests/data/sketches_matmul_elementwise.txt");
  std::vector<std::string> golden;
  for (std::string line; std::getline(in, line);) golden.push_back(line);
  std::vector<std::string> got;
  bool fused = false;
  for (const auto& s : generate_sketches(sg, TargetConfig::cpu())) {
    got.push_back(s.describe());
    fused |= s.structure[0] == NodeStructure::TiledFusedWithConsumer;
  }
  EXPECT_EQ(got, golden);
  EXPECT_TRUE(fused);
}

TEST(Sketches, Pure) {
  auto net = load_network(kBenchmarks, "bert-base");
  for (const auto& sg : net.subgraphs) {
    auto a = generate_sketches(sg, net.target);
    auto b = generate_sketches(sg, net.target);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].describe(), b[i].describe());
  }
}

TEST(Similar, SingleSubgraphIsSelfSimilar) {
  NetworkSpec net;
  net.name = "one";
  net.subgraphs.push_back(make_subgraph("a", "a", {matmul(8, 8, 8)}, 1));
  EXPECT_EQ(similar_subgraphs(net, "a"), std::set<int>{0});
}

TEST(Similar, KindsNotShapesDecide) {
  NetworkSpec net;
  net.name = "mix";
  net.subgraphs.push_back(make_subgraph("a", "a", {matmul(8, 8, 8)}, 1));
  net.subgraphs.push_back(make_subgraph("b", "b", {matmul(16, 32, 8)}, 1));
  net.subgraphs.push_back(make_subgraph("s", "s", {make_op(OpKind::Softmax, {{"i", 8}, {"j", 8}})}, 1));
  EXPECT_EQ(similar_subgraphs(net, "a"), (std::set<int>{0, 1}));
  EXPECT_EQ(similar_subgraphs(net, "b"), (std::set<int>{0, 1}));
  EXPECT_EQ(similar_subgraphs(net, "s"), std::set<int>{2});
}

}  // namespace
}  // namespace hiertune
