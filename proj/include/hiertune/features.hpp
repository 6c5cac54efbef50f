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

#include <span>

#include <Eigen/Dense>

#include "hiertune/schedule.hpp"

namespace hiertune {

/// Offsets of the feature blocks for one target configuration.
struct FeatureLayout {
  int max_dims = 12;
  int levels = 4;
  int unroll_count = 4;

  static FeatureLayout for_target(const TargetConfig& t) {
    return {t.max_feature_dims, t.tiling_levels, static_cast<int>(t.unroll_depths.size())};
  }

  int tiles_offset() const { return 0; }
  int compute_at_offset() const { return max_dims * levels; }
  int parallel_offset() const { return compute_at_offset() + 1; }
  int unroll_offset() const { return parallel_offset() + 1; }
  int footprint_offset() const { return unroll_offset() + unroll_count; }
  int flops_offset() const { return footprint_offset() + 2; }
  int structure_offset() const { return flops_offset() + 1; }
  int size() const { return structure_offset() + 3; }
};

/// Fixed-length description of a schedule: log2 tile factors per dimension and
/// level (zero-padded), normalized compute-at index, parallel fuse count,
/// one-hot unroll index, log2 L1/L2 footprints, log2 FLOPs, sketch structure flags.
Eigen::VectorXd featurize(const ScheduleState& s, const SketchContext& ctx, const FeatureLayout& layout);

/// Column-per-state feature matrix.
Eigen::MatrixXd featurize_batch(std::span<const ScheduleState> states, const SketchContext& ctx,
                                const FeatureLayout& layout);

}  // namespace hiertune
