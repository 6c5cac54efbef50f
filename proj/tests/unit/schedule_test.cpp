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
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hiertune/error.hpp"
#include "hiertune/schedule.hpp"

namespace hiertune {
namespace {

std::uint64_t brute_force_tilings(std::int64_t extent, int levels) {
  if (levels == 1) return 1;
  std::uint64_t total = 0;
  for (std::int64_t d = 1; d <= extent; ++d) {
    if (extent % d == 0) total += brute_force_tilings(extent / d, levels - 1);
  }
  return total;
}

SubgraphSpec gemm(std::int64_t m, std::int64_t k, std::int64_t n) {
  return make_subgraph("g", "g", {make_op(OpKind::MatMul, {{"M", m}, {"K", k}, {"N", n}})}, 1);
}

Sketch tiled_sketch(const SubgraphSpec& sg, int levels) {
  auto target = TargetConfig::cpu();
  target.tiling_levels = levels;
  return generate_sketches(sg, target).at(0);
}

TEST(Tilings, KnownCounts) {
  EXPECT_EQ(enumerate_tilings(1024, 4), 286u);
  EXPECT_EQ(enumerate_tilings(2, 2), 2u);
  EXPECT_EQ(enumerate_tilings(12, 2), 6u);
}

TEST(Tilings, MatchBruteForce) {
  for (std::int64_t e : {1, 2, 7, 12, 36, 60, 64, 96, 210}) {
    for (int levels = 1; levels <= 4; ++levels) {
      EXPECT_EQ(enumerate_tilings(e, levels), brute_force_tilings(e, levels)) << e << " " << levels;
      const auto all = all_tilings(e, levels);
      EXPECT_EQ(all.size(), brute_force_tilings(e, levels));
      for (const auto& t : all) {
        std::int64_t p = 1;
        for (auto f : t) p *= f;
        EXPECT_EQ(p, e);
      }
    }
  }
}

TEST(SpaceSize, LargeGemm) {
  auto target = TargetConfig::cpu();
  target.unroll_depths = {0, 16};
  auto sketch = generate_sketches(gemm(1024, 1024, 1024), target).at(0);
  ASSERT_EQ(sketch.space.compute_at.size(), 1u);
  ASSERT_EQ(sketch.space.max_parallel_fuse + 1, 4);
  EXPECT_EQ(space_size(sketch), BigInt(286) * 286 * 286 * 2 * 4);
}

TEST(SpaceSize, SmallGemmMatchesEnumeration) {
  auto sg = gemm(64, 64, 64);
  auto sketch = tiled_sketch(sg, 2);
  EXPECT_EQ(space_size(sketch), BigInt(4116));
  std::set<std::string> seen;
  enumerate_space(sketch, [&](const ScheduleState& s) {
    validate_state(s, sketch);
    seen.insert(s.canonical());
  });
  EXPECT_EQ(seen.size(), 4116u);
}

TEST(SpaceSize, UnitExtents) {
  auto sketch = tiled_sketch(gemm(1, 1, 1), 4);
  const auto expected = sketch.space.unroll_depths.size() * (sketch.space.max_parallel_fuse + 1) *
                        sketch.space.compute_at.size();
  EXPECT_EQ(space_size(sketch), BigInt(expected));
}

TEST(Canonical, RoundTrip) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  Rng rng(3);
  for (const auto& s : sample_initial_schedules(sketch, 50, rng)) {
    EXPECT_EQ(ScheduleState::parse(s.canonical()), s);
  }
  EXPECT_THROW(ScheduleState::parse("sk0|t=1.64|ca=0"), ParseError);
}

TEST(Apply, MoveDividesSmallestPrime) {
  auto sketch = tiled_sketch(gemm(1024, 1024, 1024), 4);
  ScheduleState s;
  s.tiles = {{4, 8, 8, 4}, {4, 8, 8, 4}, {4, 8, 8, 4}};
  validate_state(s, sketch);
  ModificationAction a;
  a.tiling = TileMove{0, 2};
  auto next = apply_action(s, a, sketch);
  EXPECT_EQ(next.tiles[0], (std::vector<std::int64_t>{2, 8, 16, 4}));
  EXPECT_EQ(next.tiles[1], s.tiles[1]);
  EXPECT_EQ(s.tiles[0], (std::vector<std::int64_t>{4, 8, 8, 4}));
}

TEST(Apply, DummyIsIdentity) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  Rng rng(5);
  for (const auto& s : sample_initial_schedules(sketch, 20, rng)) {
    EXPECT_EQ(apply_action(s, ModificationAction::dummy(), sketch), s);
  }
}

TEST(Apply, UnitSourceRejected) {
  auto sketch = tiled_sketch(gemm(1024, 1024, 1024), 4);
  ScheduleState s;
  s.tiles = {{1, 8, 16, 8}, {4, 8, 8, 4}, {4, 8, 8, 4}};
  ModificationAction a;
  a.tiling = TileMove{0, 1};
  EXPECT_THROW(apply_action(s, a, sketch), InvalidActionError);
  a.tiling = TileMove{1, 4};
  EXPECT_THROW(apply_action(s, a, sketch), InvalidActionError);
  ModificationAction down;
  down.unroll = -1;
  EXPECT_THROW(apply_action(s, down, sketch), InvalidActionError);
}

TEST(Mask, Boundaries) {
  auto sg = gemm(64, 64, 64);
  auto target = TargetConfig::cpu();
  target.tiling_levels = 2;
  auto sketches = generate_sketches(sg, target);
  const auto& cw = sketches.at(1);
  ASSERT_GT(cw.space.compute_at.size(), 1u);
  ActionSpace space{cw.space.num_tiled_loops()};
  ScheduleState s;
  s.sketch_id = cw.id;
  s.tiles = {{2, 32}, {2, 32}, {2, 32}};
  s.unroll_index = static_cast<int>(cw.space.unroll_depths.size()) - 1;
  auto mask = action_mask(s, cw, space);
  EXPECT_EQ(mask.valid[kComputeAt], (std::vector<bool>{false, true, true}));
  EXPECT_EQ(mask.valid[kUnroll], (std::vector<bool>{true, true, false}));
  EXPECT_TRUE(mask.valid[kTiling][0]);
  for (int i = 0; i < space.num_iters; ++i) {
    for (int j = 0; j < space.num_iters; ++j) {
      const bool expect = i != j && i / 2 == j / 2;
      EXPECT_EQ(mask.valid[kTiling][1 + i * space.num_iters + j], expect) << i << " " << j;
    }
  }
}

TEST(Mask, AgreesWithApply) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  ActionSpace space{sketch.space.num_tiled_loops()};
  Rng rng(11);
  for (const auto& s : sample_initial_schedules(sketch, 40, rng)) {
    auto mask = action_mask(s, sketch, space);
    for (int t = 0; t < space.size(kTiling); ++t) {
      for (int u = 0; u < 3; ++u) {
        auto a = space.decode({t, 1, 1, u});
        if (mask.allows(space, a)) {
          auto next = apply_action(s, a, sketch);
          validate_state(next, sketch);
        } else {
          EXPECT_THROW(apply_action(s, a, sketch), InvalidActionError);
        }
      }
    }
  }
}

// Every state is reachable from any other through single-subspace actions.
TEST(Space, ConnectedUnderActions) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  ActionSpace space{sketch.space.num_tiled_loops()};
  std::vector<ModificationAction> actions;
  for (int t = 1; t < space.size(kTiling); ++t) actions.push_back(space.decode({t, 1, 1, 1}));
  for (int h = 1; h < kNumSubspaces; ++h) {
    for (int d : {0, 2}) {
      std::array<int, kNumSubspaces> idx{0, 1, 1, 1};
      idx[h] = d;
      actions.push_back(space.decode(idx));
    }
  }
  Rng rng(1);
  auto start = sample_initial_schedules(sketch, 1, rng).front();
  std::set<std::string> seen{start.canonical()};
  std::queue<ScheduleState> frontier;
  frontier.push(start);
  while (!frontier.empty()) {
    auto s = frontier.front();
    frontier.pop();
    auto mask = action_mask(s, sketch, space);
    for (const auto& a : actions) {
      if (!mask.allows(space, a)) continue;
      auto next = apply_action(s, a, sketch);
      if (seen.insert(next.canonical()).second) frontier.push(next);
    }
  }
  EXPECT_EQ(seen.size(), 4116u);
}

TEST(Sampling, DeterministicForSeed) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  Rng a(42), b(42);
  EXPECT_EQ(sample_initial_schedules(sketch, 1, a), sample_initial_schedules(sketch, 1, b));
  Rng c(42);
  EXPECT_EQ(sample_initial_schedules(sketch, 4, c).size(), 4u);
}

TEST(Sampling, TilingsUniform) {
  auto sketch = tiled_sketch(gemm(64, 64, 64), 2);
  const auto options = all_tilings(64, 2);
  ASSERT_EQ(options.size(), 7u);
  Rng rng(2024);
  const auto states = sample_initial_schedules(sketch, 1000, rng);
  // Critical value of chi-square with 6 degrees of freedom at the 0.01 level.
  const double critical = 16.812;
  for (std::size_t d = 0; d < 3; ++d) {
    std::map<std::vector<std::int64_t>, int> counts;
    for (const auto& s : states) ++counts[s.tiles[d]];
    const double expected = 1000.0 / 7.0;
    double chi2 = 0.0;
    for (const auto& t : options) {
      const double o = counts.count(t) ? counts[t] : 0;
      chi2 += (o - expected) * (o - expected) / expected;
    }
    EXPECT_LT(chi2, critical) << "dimension " << d;
  }
}

TEST(SmallestPrime, Values) {
  EXPECT_EQ(smallest_prime_factor(4), 2);
  EXPECT_EQ(smallest_prime_factor(9), 3);
  EXPECT_EQ(smallest_prime_factor(97), 97);
  EXPECT_EQ(smallest_prime_factor(1), 1);
}

}  // namespace
}  // namespace hiertune
