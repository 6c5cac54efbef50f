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

#include "hiertune/workload.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

namespace {

struct KindInfo {
  OpKind kind;
  std::string_view name;
  std::vector<std::string_view> required;
  bool named_dims;  // free-form dimension list (elementwise-like ops)
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table{
      {OpKind::MatMul, "MatMul", {"M", "K", "N"}, false},
      {OpKind::BatchMatMul, "BatchMatMul", {"B", "M", "K", "N"}, false},
      {OpKind::Conv1D, "Conv1D", {"L", "CI", "CO", "K"}, false},
      {OpKind::Conv2D, "Conv2D", {"H", "W", "CI", "CO", "K"}, false},
      {OpKind::Conv3D, "Conv3D", {"D", "H", "W", "CI", "CO", "K"}, false},
      {OpKind::TransposedConv2D, "TransposedConv2D", {"H", "W", "CI", "CO", "K"}, false},
      {OpKind::Elementwise, "Elementwise", {}, true},
      {OpKind::Softmax, "Softmax", {}, true},
      {OpKind::Reduction, "Reduction", {}, true},
  };
  return table;
}

const KindInfo& info(OpKind kind) {
  for (const auto& k : kind_table()) {
    if (k.kind == kind) return k;
  }
  throw Error("unknown operator kind");
}

bool is_conv(OpKind k) {
  return k == OpKind::Conv1D || k == OpKind::Conv2D || k == OpKind::Conv3D ||
         k == OpKind::TransposedConv2D;
}

bool is_contraction(OpKind k) {
  return k == OpKind::MatMul || k == OpKind::BatchMatMul || is_conv(k);
}

// Output extent of a strided window.
std::int64_t conv_out(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

std::int64_t tconv_out(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return (in - 1) * stride - 2 * pad + k;
}

std::vector<TensorAxis> plain_axes(std::initializer_list<int> loops) {
  std::vector<TensorAxis> axes;
  for (int l : loops) axes.push_back({l, -1, 1});
  return axes;
}

}  // namespace

std::string_view to_string(OpKind kind) { return info(kind).name; }

OpKind op_kind_from_string(std::string_view name) {
  for (const auto& k : kind_table()) {
    if (k.name == name) return k.kind;
  }
  throw ValidationError(fmt::format("unknown operator kind '{}'", name));
}

std::int64_t TensorOpDef::param(std::string_view key, std::int64_t fallback) const {
  for (const auto& [k, v] : shape) {
    if (k == key) return v;
  }
  return fallback;
}

std::int64_t TensorOpDef::param(std::string_view key) const {
  for (const auto& [k, v] : shape) {
    if (k == key) return v;
  }
  throw ValidationError(fmt::format("{} node is missing shape parameter '{}'", to_string(kind), key));
}

std::vector<LoopDim> TensorOpDef::loops() const {
  const std::int64_t n = param("N", 1);
  const std::int64_t stride = param("stride", 1);
  const std::int64_t pad = param("pad", 0);
  switch (kind) {
    case OpKind::MatMul:
      return {{"i", param("M"), false}, {"j", param("N"), false}, {"k", param("K"), true}};
    case OpKind::BatchMatMul:
      return {{"b", param("B"), false},
              {"i", param("M"), false},
              {"j", param("N"), false},
              {"k", param("K"), true}};
    case OpKind::Conv1D: {
      const auto k = param("K");
      return {{"n", n, false},
              {"l", conv_out(param("L"), k, stride, pad), false},
              {"co", param("CO"), false},
              {"ci", param("CI"), true},
              {"kw", k, true}};
    }
    case OpKind::Conv2D: {
      const auto k = param("K");
      return {{"n", n, false},
              {"h", conv_out(param("H"), k, stride, pad), false},
              {"w", conv_out(param("W"), k, stride, pad), false},
              {"co", param("CO"), false},
              {"ci", param("CI"), true},
              {"kh", k, true},
              {"kw", k, true}};
    }
    case OpKind::Conv3D: {
      const auto k = param("K");
      return {{"n", n, false},
              {"d", conv_out(param("D"), k, stride, pad), false},
              {"h", conv_out(param("H"), k, stride, pad), false},
              {"w", conv_out(param("W"), k, stride, pad), false},
              {"co", param("CO"), false},
              {"ci", param("CI"), true},
              {"kd", k, true},
              {"kh", k, true},
              {"kw", k, true}};
    }
    case OpKind::TransposedConv2D: {
      const auto k = param("K");
      return {{"n", n, false},
              {"h", tconv_out(param("H"), k, stride, pad), false},
              {"w", tconv_out(param("W"), k, stride, pad), false},
              {"co", param("CO"), false},
              {"ci", param("CI"), true},
              {"kh", k, true},
              {"kw", k, true}};
    }
    case OpKind::Elementwise:
    case OpKind::Softmax:
    case OpKind::Reduction: {
      std::vector<LoopDim> out;
      for (const auto& [name, extent] : shape) out.push_back({name, extent, false});
      if (kind != OpKind::Elementwise && !out.empty()) out.back().reduction = true;
      return out;
    }
  }
  return {};
}

std::vector<TensorAccess> TensorOpDef::tensors() const {
  const std::int64_t stride = param("stride", 1);
  switch (kind) {
    case OpKind::MatMul:
      return {{"A", plain_axes({0, 2}), false},
              {"B", plain_axes({2, 1}), false},
              {"C", plain_axes({0, 1}), true}};
    case OpKind::BatchMatMul:
      return {{"A", plain_axes({0, 1, 3}), false},
              {"B", plain_axes({0, 3, 2}), false},
              {"C", plain_axes({0, 1, 2}), true}};
    case OpKind::Conv1D:
      return {{"in", {{0, -1, 1}, {3, -1, 1}, {1, 4, stride}}, false},
              {"weight", plain_axes({2, 3, 4}), false},
              {"out", plain_axes({0, 2, 1}), true}};
    case OpKind::Conv2D:
      return {{"in", {{0, -1, 1}, {4, -1, 1}, {1, 5, stride}, {2, 6, stride}}, false},
              {"weight", plain_axes({3, 4, 5, 6}), false},
              {"out", plain_axes({0, 3, 1, 2}), true}};
    case OpKind::Conv3D:
      return {{"in", {{0, -1, 1}, {5, -1, 1}, {1, 6, stride}, {2, 7, stride}, {3, 8, stride}}, false},
              {"weight", plain_axes({4, 5, 6, 7, 8}), false},
              {"out", plain_axes({0, 4, 1, 2, 3}), true}};
    case OpKind::TransposedConv2D:
      // Output-stationary view; the dilated input window is approximated with unit stride.
      return {{"in", {{0, -1, 1}, {4, -1, 1}, {1, 5, 1}, {2, 6, 1}}, false},
              {"weight", plain_axes({4, 3, 5, 6}), false},
              {"out", plain_axes({0, 3, 1, 2}), true}};
    case OpKind::Elementwise:
    case OpKind::Softmax:
    case OpKind::Reduction: {
      std::vector<TensorAxis> all;
      for (int i = 0; i < static_cast<int>(shape.size()); ++i) all.push_back({i, -1, 1});
      std::vector<TensorAxis> out_axes = all;
      if (kind == OpKind::Reduction && !out_axes.empty()) out_axes.pop_back();
      return {{"in", all, false}, {"out", out_axes, true}};
    }
  }
  return {};
}

TensorOpDef make_op(OpKind kind, std::vector<std::pair<std::string, std::int64_t>> shape,
                    std::vector<int> consumers) {
  TensorOpDef op;
  op.kind = kind;
  op.shape = std::move(shape);
  op.consumers = std::move(consumers);
  op.has_data_reuse = is_contraction(kind);
  op.has_reduction = is_contraction(kind) || kind == OpKind::Softmax || kind == OpKind::Reduction;
  op.is_inlinable = kind == OpKind::Elementwise;
  return op;
}

double flop_count(const TensorOpDef& op) {
  const double n = static_cast<double>(op.param("N", 1));
  const double stride = static_cast<double>(op.param("stride", 1));
  (void)stride;
  auto p = [&](std::string_view key) { return static_cast<double>(op.param(key)); };
  auto elements = [&] {
    double e = 1.0;
    for (const auto& [name, extent] : op.shape) e *= static_cast<double>(extent);
    return e;
  };
  switch (op.kind) {
    case OpKind::MatMul:
      return 2.0 * p("M") * p("K") * p("N");
    case OpKind::BatchMatMul:
      return 2.0 * p("B") * p("M") * p("K") * p("N");
    case OpKind::TransposedConv2D:
      // Every input pixel scatters a K x K window into every output channel.
      return 2.0 * n * p("H") * p("W") * p("CI") * p("CO") * p("K") * p("K");
    case OpKind::Conv1D:
    case OpKind::Conv2D:
    case OpKind::Conv3D: {
      double total = 2.0;
      for (const auto& loop : op.loops()) total *= static_cast<double>(loop.extent);
      return total;
    }
    case OpKind::Elementwise:
      return elements();
    case OpKind::Softmax:
      // max, exp-subtract, sum, divide
      return 4.0 * elements();
    case OpKind::Reduction:
      return elements();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

std::vector<int> SubgraphSpec::topological_order() const {
  const int count = static_cast<int>(nodes.size());
  std::vector<int> indegree(count, 0);
  for (const auto& node : nodes) {
    for (int c : node.consumers) {
      if (c >= 0 && c < count) ++indegree[c];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : nodes[v].consumers) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  return order;
}

std::vector<int> SubgraphSpec::producers(int node) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    const auto& c = nodes[i].consumers;
    if (std::find(c.begin(), c.end(), node) != c.end()) out.push_back(i);
  }
  return out;
}

void validate(const SubgraphSpec& sg) {
  auto fail = [&](int node, const std::string& what) {
    throw ValidationError(fmt::format("subgraph '{}' node {}: {}", sg.id, node, what));
  };
  if (sg.id.empty()) throw ValidationError("subgraph id must not be empty");
  if (sg.nodes.empty()) throw ValidationError(fmt::format("subgraph '{}': node list is empty", sg.id));
  if (sg.weight < 1) {
    throw ValidationError(fmt::format("subgraph '{}': field 'weight' must be >= 1", sg.id));
  }
  const int count = static_cast<int>(sg.nodes.size());
  for (int i = 0; i < count; ++i) {
    const auto& node = sg.nodes[i];
    const auto& ki = info(node.kind);
    if (node.shape.empty()) fail(i, "field 'shape' must not be empty");
    for (auto req : ki.required) {
      if (node.param(req, -1) < 0) fail(i, fmt::format("field 'shape.{}' is required", req));
    }
    for (const auto& [key, value] : node.shape) {
      if (key == "pad" ? value < 0 : value < 1) {
        fail(i, fmt::format("field 'shape.{}' must be {}", key, key == "pad" ? ">= 0" : ">= 1"));
      }
    }
    for (const auto& loop : node.loops()) {
      if (loop.extent < 1) fail(i, fmt::format("derived extent of loop '{}' is < 1", loop.name));
    }
    if (node.kind == OpKind::Elementwise && !node.is_inlinable) {
      fail(i, "field 'is_inlinable' must be true for Elementwise");
    }
    if (is_contraction(node.kind) && !(node.has_data_reuse && node.has_reduction)) {
      fail(i, "fields 'has_data_reuse' and 'has_reduction' must be true for contractions");
    }
    for (int c : node.consumers) {
      if (c < 0 || c >= count || c == i) fail(i, fmt::format("field 'consumers' has invalid id {}", c));
    }
  }
  if (static_cast<int>(sg.topological_order().size()) != count) {
    throw ValidationError(fmt::format("subgraph '{}': node graph has a cycle", sg.id));
  }
  if (!(sg.flops > 0.0)) throw ValidationError(fmt::format("subgraph '{}': flops must be > 0", sg.id));
}

SubgraphSpec make_subgraph(std::string id, std::string name, std::vector<TensorOpDef> nodes,
                           std::int64_t weight) {
  SubgraphSpec sg;
  sg.id = std::move(id);
  sg.name = std::move(name);
  sg.nodes = std::move(nodes);
  sg.weight = weight;
  std::vector<std::string> kinds;
  for (const auto& node : sg.nodes) {
    kinds.emplace_back(to_string(node.kind));
  }
  std::sort(kinds.begin(), kinds.end());
  sg.similarity_key = fmt::format("{}", fmt::join(kinds, ","));
  // Validate shapes before deriving FLOPs from them.
  sg.flops = 1.0;
  validate(sg);
  sg.flops = 0.0;
  for (const auto& node : sg.nodes) sg.flops += flop_count(node);
  validate(sg);
  return sg;
}

TargetConfig TargetConfig::cpu() { return TargetConfig{}; }

TargetConfig TargetConfig::gpu() {
  TargetConfig t;
  t.name = "gpu";
  t.unroll_depths = {0, 16, 64, 512, 1024};
  return t;
}

void TargetConfig::validate() const {
  if (tiling_levels < 1) throw ValidationError("target field 'tiling_levels' must be >= 1");
  if (unroll_depths.empty()) throw ValidationError("target field 'unroll_depths' must not be empty");
  if (max_parallel_fuse < 0) throw ValidationError("target field 'max_parallel_fuse' must be >= 0");
  if (max_feature_dims < 1) throw ValidationError("target field 'max_feature_dims' must be >= 1");
}

int NetworkSpec::index_of(std::string_view subgraph_id) const {
  for (int i = 0; i < static_cast<int>(subgraphs.size()); ++i) {
    if (subgraphs[i].id == subgraph_id) return i;
  }
  throw ValidationError(fmt::format("unknown subgraph id '{}'", subgraph_id));
}

double NetworkSpec::weighted_latency(const std::vector<double>& latencies) const {
  double total = 0.0;
  for (std::size_t i = 0; i < subgraphs.size() && i < latencies.size(); ++i) {
    total += static_cast<double>(subgraphs[i].weight) * latencies[i];
  }
  return total;
}

void validate(const NetworkSpec& net) {
  if (net.subgraphs.empty()) {
    throw ValidationError(fmt::format("network '{}': subgraph list is empty", net.name));
  }
  std::set<std::string> ids;
  for (const auto& sg : net.subgraphs) {
    validate(sg);
    if (!ids.insert(sg.id).second) {
      throw ValidationError(fmt::format("network '{}': duplicate subgraph id '{}'", net.name, sg.id));
    }
  }
  net.target.validate();
}

// ---------------------------------------------------------------------------
// Workload file

namespace {

using ojson = nlohmann::ordered_json;

template <typename T>
T get_field(const ojson& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(fmt::format("{}: missing field '{}'", where, key));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(fmt::format("{}: field '{}' has the wrong type", where, key));
  }
}

template <typename T>
T get_or(const ojson& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, where);
}

TensorOpDef parse_node(const ojson& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": node must be an object");
  TensorOpDef op;
  const auto kind = op_kind_from_string(get_field<std::string>(j, "kind", where));
  std::vector<std::pair<std::string, std::int64_t>> shape;
  if (!j.contains("shape") || !j["shape"].is_object()) {
    throw ValidationError(where + ": field 'shape' must be an object");
  }
  for (const auto& [key, value] : j["shape"].items()) {
    if (!value.is_number_integer()) {
      throw ValidationError(fmt::format("{}: field 'shape.{}' must be an integer", where, key));
    }
    shape.emplace_back(key, value.get<std::int64_t>());
  }
  op = make_op(kind, std::move(shape), get_or<std::vector<int>>(j, "consumers", {}, where));
  op.has_data_reuse = get_or<bool>(j, "has_data_reuse", op.has_data_reuse, where);
  op.is_inlinable = get_or<bool>(j, "is_inlinable", op.is_inlinable, where);
  op.has_reduction = get_or<bool>(j, "has_reduction", op.has_reduction, where);
  return op;
}

TargetConfig parse_target(const ojson& j) {
  TargetConfig t = TargetConfig::cpu();
  if (j.is_null()) return t;
  const std::string where = "target";
  const auto name = get_or<std::string>(j, "name", "cpu", where);
  if (name == "gpu") t = TargetConfig::gpu();
  t.name = name;
  t.tiling_levels = get_or<int>(j, "tiling_levels", t.tiling_levels, where);
  t.unroll_depths = get_or<std::vector<int>>(j, "unroll_depths", t.unroll_depths, where);
  t.max_parallel_fuse = get_or<int>(j, "max_parallel_fuse", t.max_parallel_fuse, where);
  t.max_feature_dims = get_or<int>(j, "max_feature_dims", t.max_feature_dims, where);
  return t;
}

}  // namespace

NetworkSpec parse_network(const ojson& j) {
  NetworkSpec net;
  net.name = get_field<std::string>(j, "name", "network");
  const std::string where = fmt::format("network '{}'", net.name);
  if (!j.contains("subgraphs") || !j["subgraphs"].is_array()) {
    throw ValidationError(where + ": field 'subgraphs' must be a list");
  }
  net.target = parse_target(j.contains("target") ? j["target"] : ojson());
  if (j.contains("sim")) net.sim_overrides = j["sim"];
  for (const auto& sj : j["subgraphs"]) {
    const auto id = get_field<std::string>(sj, "id", where + " subgraph");
    const std::string swhere = fmt::format("{} subgraph '{}'", where, id);
    if (!sj.contains("nodes") || !sj["nodes"].is_array()) {
      throw ValidationError(swhere + ": field 'nodes' must be a list");
    }
    std::vector<TensorOpDef> nodes;
    int index = 0;
    for (const auto& nj : sj["nodes"]) {
      const std::string nwhere = fmt::format("{} node {}", swhere, index);
      if (nj.contains("id") && nj["id"].get<int>() != index) {
        throw ValidationError(nwhere + ": field 'id' must equal the node's position");
      }
      nodes.push_back(parse_node(nj, nwhere));
      ++index;
    }
    net.subgraphs.push_back(make_subgraph(id, get_or<std::string>(sj, "name", id, swhere),
                                          std::move(nodes),
                                          get_or<std::int64_t>(sj, "weight", 1, swhere)));
  }
  validate(net);
  return net;
}

std::vector<NetworkSpec> load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open workload file '{}'", path.string()));
  ojson root;
  try {
    root = ojson::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!root.contains("networks") || !root["networks"].is_array()) {
    throw ValidationError(fmt::format("{}: field 'networks' must be a list", path.string()));
  }
  std::vector<NetworkSpec> out;
  for (const auto& nj : root["networks"]) out.push_back(parse_network(nj));
  return out;
}

NetworkSpec load_network(const std::filesystem::path& path, std::string_view name) {
  auto nets = load_workload(path);
  if (name.empty()) {
    if (nets.size() != 1) {
      throw ValidationError(fmt::format("{} holds {} networks; select one by name", path.string(),
                                        nets.size()));
    }
    return nets.front();
  }
  for (auto& n : nets) {
    if (n.name == name) return n;
  }
  throw ValidationError(fmt::format("{}: no network named '{}'", path.string(), name));
}

nlohmann::ordered_json to_json(const NetworkSpec& net) {
  ojson j;
  j["name"] = net.name;
  j["target"] = {{"name", net.target.name},
                 {"tiling_levels", net.target.tiling_levels},
                 {"unroll_depths", net.target.unroll_depths},
                 {"max_parallel_fuse", net.target.max_parallel_fuse},
                 {"max_feature_dims", net.target.max_feature_dims}};
  if (!net.sim_overrides.is_null()) j["sim"] = net.sim_overrides;
  j["subgraphs"] = ojson::array();
  for (const auto& sg : net.subgraphs) {
    ojson s;
    s["id"] = sg.id;
    s["name"] = sg.name;
    s["weight"] = sg.weight;
    s["nodes"] = ojson::array();
    for (const auto& node : sg.nodes) {
      ojson nj;
      nj["kind"] = std::string(to_string(node.kind));
      nj["shape"] = ojson::object();
      for (const auto& [k, v] : node.shape) nj["shape"][k] = v;
      nj["consumers"] = node.consumers;
      nj["has_data_reuse"] = node.has_data_reuse;
      nj["is_inlinable"] = node.is_inlinable;
      nj["has_reduction"] = node.has_reduction;
      s["nodes"].push_back(nj);
    }
    j["subgraphs"].push_back(s);
  }
  return j;
}

std::set<int> similar_subgraphs(const NetworkSpec& net, int subgraph_index) {
  if (subgraph_index < 0 || subgraph_index >= static_cast<int>(net.subgraphs.size())) {
    throw ValidationError(fmt::format("unknown subgraph index {}", subgraph_index));
  }
  std::set<int> out;
  const auto& key = net.subgraphs[subgraph_index].similarity_key;
  for (int i = 0; i < static_cast<int>(net.subgraphs.size()); ++i) {
    if (net.subgraphs[i].similarity_key == key) out.insert(i);
  }
  return out;
}

std::set<int> similar_subgraphs(const NetworkSpec& net, std::string_view subgraph_id) {
  return similar_subgraphs(net, net.index_of(subgraph_id));
}

// ---------------------------------------------------------------------------
// Sketch generation

std::string_view to_string(NodeStructure s) {
  switch (s) {
    case NodeStructure::Inlined: return "Inlined";
    case NodeStructure::Tiled: return "Tiled";
    case NodeStructure::TiledFusedWithConsumer: return "TiledFusedWithConsumer";
    case NodeStructure::CacheWriteThenTiled: return "CacheWriteThenTiled";
    case NodeStructure::RFactorThenTiled: return "RFactorThenTiled";
    case NodeStructure::Skipped: return "Skipped";
  }
  return "?";
}

bool is_tiled(NodeStructure s) {
  return s == NodeStructure::Tiled || s == NodeStructure::TiledFusedWithConsumer ||
         s == NodeStructure::CacheWriteThenTiled || s == NodeStructure::RFactorThenTiled;
}

std::string Sketch::describe() const {
  std::vector<std::string> parts;
  for (auto s : structure) parts.emplace_back(to_string(s));
  return fmt::format("{}", fmt::join(parts, ","));
}

namespace {

// Options for `node` given the already-decided structures of its consumers,
// listed in rule order: Skip, Inline, Tiling, Tiling with fusion, Cache write, rfactor.
std::vector<NodeStructure> node_options(const SubgraphSpec& sg, int node,
                                        const std::vector<NodeStructure>& decided) {
  const auto& op = sg.nodes[node];
  const bool inlinable = op.is_inlinable && !op.consumers.empty();
  std::vector<NodeStructure> out;
  const bool skip = !inlinable && !op.has_data_reuse;
  if (skip) out.push_back(NodeStructure::Skipped);
  if (inlinable) {
    out.push_back(NodeStructure::Inlined);
    return out;
  }
  if (op.has_data_reuse) {
    out.push_back(NodeStructure::Tiled);
    if (op.consumers.size() == 1) {
      const int c = op.consumers.front();
      if (sg.nodes[c].kind == OpKind::Elementwise && decided[c] == NodeStructure::Skipped &&
          sg.producers(c).size() == 1) {
        out.push_back(NodeStructure::TiledFusedWithConsumer);
      }
    }
    if (op.consumers.empty()) out.push_back(NodeStructure::CacheWriteThenTiled);
  }
  if (op.has_reduction) out.push_back(NodeStructure::RFactorThenTiled);
  return out;
}

// Stage that executes `node` (following inlining and fusion).
int owning_stage(const SubgraphSpec& sg, const std::vector<NodeStructure>& st, int node) {
  int cur = node;
  while (st[cur] == NodeStructure::Inlined) cur = sg.nodes[cur].consumers.front();
  for (int p : sg.producers(cur)) {
    if (st[p] == NodeStructure::TiledFusedWithConsumer) return p;
  }
  return cur;
}

SpaceDescriptor describe_space(const SubgraphSpec& sg, const std::vector<NodeStructure>& st,
                               const TargetConfig& target) {
  SpaceDescriptor space;
  space.levels = target.tiling_levels;
  space.unroll_depths = target.unroll_depths;
  space.compute_at.push_back({});
  for (int node : sg.topological_order()) {
    if (!is_tiled(st[node])) continue;
    const auto loops = sg.nodes[node].loops();
    for (int l = 0; l < static_cast<int>(loops.size()); ++l) {
      space.tiled_dims.push_back({node, l, loops[l].name, loops[l].extent, loops[l].reduction});
    }
    if (st[node] == NodeStructure::TiledFusedWithConsumer ||
        st[node] == NodeStructure::CacheWriteThenTiled) {
      for (int level = 0; level + 1 < space.levels; ++level) {
        space.compute_at.push_back({node, level});
      }
    }
  }
  return space;
}

}  // namespace

std::vector<Stage> stages_of(const SubgraphSpec& sg, const Sketch& sketch) {
  const auto& st = sketch.structure;
  const int levels = sketch.space.levels;
  std::vector<Stage> stages;
  std::map<int, int> stage_index;
  for (int node : sg.topological_order()) {
    const int owner = owning_stage(sg, st, node);
    if (owner != node) continue;
    Stage stage;
    stage.anchor = node;
    stage.structure = st[node];
    const auto loops = sg.nodes[node].loops();
    for (const auto& loop : loops) stage.loop_extents.push_back(loop.extent);
    stage.tensors = sg.nodes[node].tensors();
    stage.dim_of_loop.assign(loops.size(), -1);
    for (int d = 0; d < static_cast<int>(sketch.space.tiled_dims.size()); ++d) {
      const auto& td = sketch.space.tiled_dims[d];
      if (td.node == node) stage.dim_of_loop[td.loop] = d;
    }
    if (is_tiled(stage.structure)) {
      const int outer_levels = std::max(1, levels - 1);
      for (int level = 0; level < outer_levels; ++level) {
        for (int l = 0; l < static_cast<int>(loops.size()); ++l) {
          if (!loops[l].reduction) stage.parallel_loops.emplace_back(l, level);
        }
        if (level == 0 && stage.structure == NodeStructure::RFactorThenTiled) {
          for (int l = 0; l < static_cast<int>(loops.size()); ++l) {
            if (loops[l].reduction) stage.parallel_loops.emplace_back(l, 0);
          }
        }
      }
    } else {
      for (int l = 0; l < static_cast<int>(loops.size()); ++l) {
        if (!loops[l].reduction) stage.parallel_loops.emplace_back(l, -1);
      }
    }
    stage_index[node] = static_cast<int>(stages.size());
    stages.push_back(std::move(stage));
  }
  for (int node = 0; node < static_cast<int>(sg.nodes.size()); ++node) {
    const int owner = owning_stage(sg, st, node);
    auto& stage = stages[stage_index.at(owner)];
    stage.flops += flop_count(sg.nodes[node]);
    if (owner == node) continue;
    if (st[node] == NodeStructure::Inlined) {
      stage.folded.push_back(node);
    } else {
      stage.fused_consumer = node;
    }
  }
  return stages;
}

std::vector<Sketch> generate_sketches(const SubgraphSpec& sg, const TargetConfig& target) {
  target.validate();
  auto order = sg.topological_order();
  std::reverse(order.begin(), order.end());
  std::vector<std::vector<NodeStructure>> results;
  std::vector<NodeStructure> current(sg.nodes.size(), NodeStructure::Skipped);
  std::function<void(std::size_t)> expand = [&](std::size_t pos) {
    if (pos == order.size()) {
      results.push_back(current);
      return;
    }
    const int node = order[pos];
    for (auto option : node_options(sg, node, current)) {
      current[node] = option;
      expand(pos + 1);
    }
    current[node] = NodeStructure::Skipped;
  };
  expand(0);

  std::vector<Sketch> sketches;
  for (auto& st : results) {
    Sketch sk;
    sk.id = static_cast<int>(sketches.size());
    sk.subgraph_id = sg.id;
    sk.structure = st;
    sk.space = describe_space(sg, st, target);
    int fusible = 0;
    for (const auto& stage : stages_of(sg, sk)) {
      fusible = std::max(fusible, static_cast<int>(stage.parallel_loops.size()));
    }
    sk.space.max_parallel_fuse = std::min(target.max_parallel_fuse, fusible);
    sketches.push_back(std::move(sk));
  }
  return sketches;
}

}  // namespace hiertune
