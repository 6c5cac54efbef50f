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

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hiertune {

enum class OpKind {
  MatMul,
  BatchMatMul,
  Conv1D,
  Conv2D,
  Conv3D,
  TransposedConv2D,
  Elementwise,
  Softmax,
  Reduction,
};

std::string_view to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view name);

/// One loop of an operator's iteration domain.
struct LoopDim {
  std::string name;
  std::int64_t extent = 1;
  bool reduction = false;
};

/// One axis of a tensor access. The axis covers
/// `(tile(loop) - 1) * stride + tile(window_loop)` elements for a window access
/// and `tile(loop)` elements otherwise.
struct TensorAxis {
  int loop = 0;
  int window_loop = -1;
  std::int64_t stride = 1;
};

struct TensorAccess {
  std::string name;
  std::vector<TensorAxis> axes;
  bool is_output = false;
};

/// A single operator node. `shape` keeps the declaration order of its named
/// parameters; the loop nest and tensor accesses are derived from it.
struct TensorOpDef {
  OpKind kind = OpKind::Elementwise;
  std::vector<std::pair<std::string, std::int64_t>> shape;
  bool has_data_reuse = false;
  bool is_inlinable = false;
  bool has_reduction = false;
  std::vector<int> consumers;

  /// Named shape parameter, or `fallback` when absent.
  std::int64_t param(std::string_view key, std::int64_t fallback) const;
  /// Named shape parameter; throws ValidationError when absent.
  std::int64_t param(std::string_view key) const;

  std::vector<LoopDim> loops() const;
  std::vector<TensorAccess> tensors() const;
};

/// Builds a node with kind-default flags.
TensorOpDef make_op(OpKind kind, std::vector<std::pair<std::string, std::int64_t>> shape,
                    std::vector<int> consumers = {});

/// Floating-point operations of one execution of `op` (a multiply-add counts as 2).
double flop_count(const TensorOpDef& op);

struct SubgraphSpec {
  std::string id;
  std::string name;
  std::vector<TensorOpDef> nodes;
  std::int64_t weight = 1;
  double flops = 0.0;
  std::string similarity_key;

  /// Node ids in topological order (producers before consumers).
  std::vector<int> topological_order() const;
  /// Producers of `node` in ascending id order.
  std::vector<int> producers(int node) const;
};

/// Fills `flops` and `similarity_key` and validates every invariant.
SubgraphSpec make_subgraph(std::string id, std::string name, std::vector<TensorOpDef> nodes,
                           std::int64_t weight);

/// Per-target knobs of the schedule space.
struct TargetConfig {
  std::string name = "cpu";
  int tiling_levels = 4;
  std::vector<int> unroll_depths{0, 16, 64, 512};
  int max_parallel_fuse = 3;
  int max_feature_dims = 12;

  static TargetConfig cpu();
  static TargetConfig gpu();
  void validate() const;
};

struct NetworkSpec {
  std::string name;
  std::vector<SubgraphSpec> subgraphs;
  TargetConfig target;
  /// Raw "sim" block from the workload file (simulator overrides), possibly null.
  nlohmann::ordered_json sim_overrides;

  int index_of(std::string_view subgraph_id) const;
  /// Estimated network latency sum_n w_n * g_n for per-subgraph latencies.
  double weighted_latency(const std::vector<double>& latencies) const;
};

void validate(const SubgraphSpec& sg);
void validate(const NetworkSpec& net);

/// Parses every network of a workload file.
std::vector<NetworkSpec> load_workload(const std::filesystem::path& path);
/// Loads one network by name; an empty name requires a single-network file.
NetworkSpec load_network(const std::filesystem::path& path, std::string_view name = {});
NetworkSpec parse_network(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const NetworkSpec& net);

/// Subgraphs whose node-kind multiset equals that of `subgraph_index`
/// (including the subgraph itself), as indices into `net.subgraphs`.
std::set<int> similar_subgraphs(const NetworkSpec& net, int subgraph_index);
std::set<int> similar_subgraphs(const NetworkSpec& net, std::string_view subgraph_id);

// ---------------------------------------------------------------------------
// Sketches

enum class NodeStructure {
  Inlined,
  Tiled,
  TiledFusedWithConsumer,
  CacheWriteThenTiled,
  RFactorThenTiled,
  Skipped,
};

std::string_view to_string(NodeStructure s);
bool is_tiled(NodeStructure s);

struct TiledDim {
  int node = 0;
  int loop = 0;
  std::string name;
  std::int64_t extent = 1;
  bool reduction = false;
};

/// A compute-at position. The root position has stage_id == -1.
struct ComputeAtCandidate {
  int stage_id = -1;
  int iter_id = -1;
  bool is_root() const { return stage_id < 0; }
  bool operator==(const ComputeAtCandidate&) const = default;
};

struct SpaceDescriptor {
  int levels = 4;
  std::vector<TiledDim> tiled_dims;
  std::vector<ComputeAtCandidate> compute_at;
  int max_parallel_fuse = 0;
  std::vector<int> unroll_depths;

  int num_tiled_loops() const { return static_cast<int>(tiled_dims.size()) * levels; }
};

struct Sketch {
  int id = 0;
  std::string subgraph_id;
  std::vector<NodeStructure> structure;
  SpaceDescriptor space;

  std::string describe() const;
};

/// One execution stage of a sketch: an anchor node plus the nodes folded into it
/// (inlined producers, a fused consumer).
struct Stage {
  int anchor = 0;
  NodeStructure structure = NodeStructure::Skipped;
  std::vector<int> folded;
  int fused_consumer = -1;
  double flops = 0.0;
  std::vector<std::int64_t> loop_extents;
  std::vector<TensorAccess> tensors;
  /// Indices into SpaceDescriptor::tiled_dims of this stage's loops, one per
  /// anchor loop, or -1 for untiled loops.
  std::vector<int> dim_of_loop;
  /// Loops that may be fused for parallel execution, outermost first, as
  /// (anchor loop, tiling level) pairs; level -1 denotes an untiled loop.
  std::vector<std::pair<int, int>> parallel_loops;
};

std::vector<Stage> stages_of(const SubgraphSpec& sg, const Sketch& sketch);

/// Applies the structural rules to every node in reverse topological order and
/// returns the duplicate-free cartesian product, in rule order.
std::vector<Sketch> generate_sketches(const SubgraphSpec& sg, const TargetConfig& target);

}  // namespace hiertune
