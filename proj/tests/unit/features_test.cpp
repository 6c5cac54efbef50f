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


#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "hiertune/features.hpp"

namespace hiertune {
namespace {

struct Fixture {
  TargetConfig target;
  SubgraphSpec sg;
  std::vector<Sketch> sketches;

  explicit Fixture(int levels) {
    target = TargetConfig::cpu();
    target.tiling_levels = levels;
    sg = make_subgraph("g", "g", {make_op(OpKind::MatMul, {{"M", 64}, {"K", 64}, {"N", 64}})}, 1);
    sketches = generate_sketches(sg, target);
  }
};

TEST(Features, Deterministic) {
  Fixture f(2);
  SketchContext ctx(f.sg, f.sketches[0]);
  auto layout = FeatureLayout::for_target(f.target);
  Rng rng(7);
  for (const auto& s : sample_initial_schedules(f.sketches[0], 20, rng)) {
    auto a = featurize(s, ctx, layout);
    auto b = featurize(s, ctx, layout);
    ASSERT_EQ(a.size(), layout.size());
    EXPECT_EQ(a, b);
    EXPECT_TRUE(a.allFinite());
  }
}

TEST(Features, UnrollOnlyTouchesUnrollBlock) {
  Fixture f(2);
  SketchContext ctx(f.sg, f.sketches[0]);
  auto layout = FeatureLayout::for_target(f.target);
  Rng rng(9);
  for (auto s : sample_initial_schedules(f.sketches[0], 10, rng)) {
    s.unroll_index = 0;
    auto t = s;
    t.unroll_index = 2;
    auto a = featurize(s, ctx, layout);
    auto b = featurize(t, ctx, layout);
    for (int i = 0; i < layout.size(); ++i) {
      const bool in_block = i >= layout.unroll_offset() && i < layout.unroll_offset() + layout.unroll_count;
      if (!in_block) EXPECT_EQ(a[i], b[i]) << "feature " << i;
    }
    EXPECT_NE(a.segment(layout.unroll_offset(), layout.unroll_count),
              b.segment(layout.unroll_offset(), layout.unroll_count));
  }
}

TEST(Features, InjectiveOverSmallSpace) {
  Fixture f(2);
  SketchContext ctx(f.sg, f.sketches[0]);
  auto layout = FeatureLayout::for_target(f.target);
  std::set<std::vector<double>> seen;
  int states = 0;
  enumerate_space(f.sketches[0], [&](const ScheduleState& s) {
    auto v = featurize(s, ctx, layout);
    seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
    ++states;
  });
  EXPECT_EQ(states, 4116);
  EXPECT_EQ(seen.size(), 4116u);
}

TEST(Features, BatchMatchesSingle) {
  Fixture f(4);
  SketchContext ctx(f.sg, f.sketches[1]);
  auto layout = FeatureLayout::for_target(f.target);
  Rng rng(1);
  auto states = sample_initial_schedules(f.sketches[1], 8, rng);
  auto batch = featurize_batch(states, ctx, layout);
  ASSERT_EQ(batch.cols(), 8);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(Eigen::VectorXd(batch.col(i)), featurize(states[i], ctx, layout));
}

}  // namespace
}  // namespace hiertune
