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

#include "hiertune/features.hpp"

#include <cmath>

namespace hiertune {

namespace {

// Log-scale features are divided down to roughly [0, 1] so the tanh networks
// do not start saturated. Tree splits are unaffected by the scaling.
constexpr double kTileScale = 1.0 / 16.0;
constexpr double kFootprintScale = 1.0 / 32.0;
constexpr double kFlopsScale = 1.0 / 64.0;

}  // namespace

Eigen::VectorXd featurize(const ScheduleState& s, const SketchContext& ctx,
                          const FeatureLayout& layout) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(layout.size());
  const auto& space = ctx.sketch->space;
  const int dims = std::min(layout.max_dims, static_cast<int>(s.tiles.size()));
  const int levels = std::min(layout.levels, space.levels);
  for (int d = 0; d < dims; ++d) {
    for (int l = 0; l < levels; ++l) {
      f[layout.tiles_offset() + d * layout.levels + l] =
          kTileScale * std::log2(static_cast<double>(s.tiles[d][l]));
    }
  }
  const auto candidates = static_cast<double>(space.compute_at.size());
  f[layout.compute_at_offset()] = candidates > 1 ? s.compute_at_index / (candidates - 1.0) : 0.0;
  f[layout.parallel_offset()] = s.parallel_fuse_count;
  if (s.unroll_index < layout.unroll_count) f[layout.unroll_offset() + s.unroll_index] = 1.0;

  double l1 = 0.0;
  double l2 = 0.0;
  bool fused = false;
  bool cache_write = false;
  bool rfactor = false;
  for (const auto& stage : ctx.stages) {
    const auto fp = stage_footprint(s, *ctx.sketch, *ctx.sg, stage);
    l1 += fp.l1;
    l2 += fp.l2;
    fused |= stage.structure == NodeStructure::TiledFusedWithConsumer;
    cache_write |= stage.structure == NodeStructure::CacheWriteThenTiled;
    rfactor |= stage.structure == NodeStructure::RFactorThenTiled;
  }
  f[layout.footprint_offset()] = kFootprintScale * std::log2(1.0 + l1);
  f[layout.footprint_offset() + 1] = kFootprintScale * std::log2(1.0 + l2);
  f[layout.flops_offset()] = kFlopsScale * std::log2(ctx.sg->flops);
  f[layout.structure_offset()] = fused ? 1.0 : 0.0;
  f[layout.structure_offset() + 1] = cache_write ? 1.0 : 0.0;
  f[layout.structure_offset() + 2] = rfactor ? 1.0 : 0.0;
  return f;
}

Eigen::MatrixXd featurize_batch(std::span<const ScheduleState> states, const SketchContext& ctx,
                                const FeatureLayout& layout) {
  Eigen::MatrixXd out(layout.size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = featurize(states[i], ctx, layout);
  }
  return out;
}

}  // namespace hiertune
