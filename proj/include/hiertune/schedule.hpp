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

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hiertune/workload.hpp"

namespace hiertune {

using Rng = std::mt19937_64;
using BigInt = boost::multiprecision::cpp_int;

/// A fully parameterized point of a sketch's space. Tile factors are listed
/// outermost level first; their product per dimension equals the extent.
struct ScheduleState {
  int sketch_id = 0;
  std::vector<std::vector<std::int64_t>> tiles;
  int compute_at_index = 0;
  int parallel_fuse_count = 0;
  int unroll_index = 0;

  /// `sk<id>|t=<f.f.f>,<f.f.f>|ca=<i>|par=<n>|ur=<i>`
  std::string canonical() const;
  static ScheduleState parse(std::string_view text);

  auto operator<=>(const ScheduleState&) const = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate_state(const ScheduleState& s, const Sketch& sketch);

struct TileMove {
  int from = 0;
  int to = 0;
  bool operator==(const TileMove&) const = default;
};

/// One joint modification: a tiling move (or none) and three index shifts in {-1, 0, +1}.
struct ModificationAction {
  std::optional<TileMove> tiling;
  int compute_at = 0;
  int parallel = 0;
  int unroll = 0;

  static ModificationAction dummy() { return {}; }
  bool is_dummy() const { return !tiling && compute_at == 0 && parallel == 0 && unroll == 0; }
  bool operator==(const ModificationAction&) const = default;
};

enum Subspace : int { kTiling = 0, kComputeAt = 1, kParallel = 2, kUnroll = 3 };
inline constexpr int kNumSubspaces = 4;
std::string_view to_string(Subspace s);

/// Index layout of the four categorical action heads. The tiling head holds
/// the dummy action at index 0 followed by Move(i, j) at 1 + i * num_iters + j,
/// diagonal pairs included (always masked). Delta heads map {0, 1, 2} to {-1, 0, +1}.
struct ActionSpace {
  int num_iters = 0;

  int size(int subspace) const { return subspace == kTiling ? num_iters * num_iters + 1 : 3; }
  std::array<int, kNumSubspaces> sizes() const {
    return {size(kTiling), 3, 3, 3};
  }
  int total() const { return size(kTiling) + 9; }
  ModificationAction decode(const std::array<int, kNumSubspaces>& index) const;
  std::array<int, kNumSubspaces> encode(const ModificationAction& a) const;
};

struct ActionMask {
  std::array<std::vector<bool>, kNumSubspaces> valid;

  bool allows(const ActionSpace& space, const ModificationAction& a) const;
};

ActionMask action_mask(const ScheduleState& s, const Sketch& sketch, const ActionSpace& space);

/// Applies `a`; throws InvalidActionError naming the offending subspace when the
/// action is masked out. The input state is left untouched.
ScheduleState apply_action(const ScheduleState& s, const ModificationAction& a,
                           const Sketch& sketch);

std::int64_t smallest_prime_factor(std::int64_t n);

/// Number of ordered `levels`-tuples of positive integers whose product is `extent`.
/// Throws OverflowError when the count does not fit 64 bits.
std::uint64_t enumerate_tilings(std::int64_t extent, int levels);
/// All such tuples, in lexicographic order.
std::vector<std::vector<std::int64_t>> all_tilings(std::int64_t extent, int levels);

BigInt space_size(const Sketch& sketch);

/// Calls `visit` for every state of the sketch in canonical enumeration order.
void enumerate_space(const Sketch& sketch, const std::function<void(const ScheduleState&)>& visit);

std::vector<ScheduleState> sample_initial_schedules(const Sketch& sketch, int count, Rng& rng);

// ---------------------------------------------------------------------------
// Loop-nest analysis shared by features and the simulator.

/// A sketch together with its subgraph and derived stages. Borrows both.
struct SketchContext {
  SketchContext(const SubgraphSpec& subgraph, const Sketch& sk)
      : sg(&subgraph), sketch(&sk), stages(stages_of(subgraph, sk)) {}

  const SubgraphSpec* sg;
  const Sketch* sketch;
  std::vector<Stage> stages;
};

struct StageFootprint {
  double l1 = 0.0;
  double l2 = 0.0;
};

/// Cumulative tile of an anchor loop over the `depth` innermost levels
/// (the full extent for untiled loops).
std::int64_t loop_tile(const ScheduleState& s, const Stage& stage, const SubgraphSpec& sg, int loop,
                       int depth);

StageFootprint stage_footprint(const ScheduleState& s, const Sketch& sketch, const SubgraphSpec& sg,
                               const Stage& stage);

/// Product of the extents of the first `count` parallel loops of the stage.
double parallel_extent(const ScheduleState& s, const Stage& stage, const SubgraphSpec& sg, int count);

}  // namespace hiertune
