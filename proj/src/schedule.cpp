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

#include "hiertune/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

namespace {

std::vector<std::pair<std::int64_t, int>> factorize(std::int64_t n) {
  std::vector<std::pair<std::int64_t, int>> out;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    if (e > 0) out.emplace_back(p, e);
  }
  if (n > 1) out.emplace_back(n, 1);
  return out;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(fmt::format("expected an integer, got '{}'", text));
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view expect_prefix(std::string_view field, std::string_view prefix) {
  if (field.substr(0, prefix.size()) != prefix) {
    throw ParseError(fmt::format("schedule field '{}' should start with '{}'", field, prefix));
  }
  return field.substr(prefix.size());
}

}  // namespace

std::string ScheduleState::canonical() const {
  std::string out = fmt::format("sk{}|t=", sketch_id);
  for (std::size_t d = 0; d < tiles.size(); ++d) {
    if (d > 0) out += ',';
    out += fmt::format("{}", fmt::join(tiles[d], "."));
  }
  out += fmt::format("|ca={}|par={}|ur={}", compute_at_index, parallel_fuse_count, unroll_index);
  return out;
}

ScheduleState ScheduleState::parse(std::string_view text) {
  const auto fields = split(text, '|');
  if (fields.size() != 5) throw ParseError(fmt::format("malformed schedule '{}'", text));
  ScheduleState s;
  s.sketch_id = static_cast<int>(parse_int(expect_prefix(fields[0], "sk")));
  const auto tiles = expect_prefix(fields[1], "t=");
  if (!tiles.empty()) {
    for (auto dim : split(tiles, ',')) {
      std::vector<std::int64_t> factors;
      for (auto f : split(dim, '.')) factors.push_back(parse_int(f));
      s.tiles.push_back(std::move(factors));
    }
  }
  s.compute_at_index = static_cast<int>(parse_int(expect_prefix(fields[2], "ca=")));
  s.parallel_fuse_count = static_cast<int>(parse_int(expect_prefix(fields[3], "par=")));
  s.unroll_index = static_cast<int>(parse_int(expect_prefix(fields[4], "ur=")));
  return s;
}

void validate_state(const ScheduleState& s, const Sketch& sketch) {
  const auto& space = sketch.space;
  if (s.sketch_id != sketch.id) {
    throw ValidationError(fmt::format("state belongs to sketch {}, not {}", s.sketch_id, sketch.id));
  }
  if (s.tiles.size() != space.tiled_dims.size()) {
    throw ValidationError("state tile list does not match the sketch's tiled dimensions");
  }
  for (std::size_t d = 0; d < s.tiles.size(); ++d) {
    if (static_cast<int>(s.tiles[d].size()) != space.levels) {
      throw ValidationError(fmt::format("dimension {} has {} levels, expected {}", d,
                                        s.tiles[d].size(), space.levels));
    }
    std::int64_t product = 1;
    for (auto f : s.tiles[d]) {
      if (f < 1) throw ValidationError(fmt::format("dimension {} has a factor < 1", d));
      product *= f;
    }
    if (product != space.tiled_dims[d].extent) {
      throw ValidationError(fmt::format("dimension {} factors multiply to {}, extent is {}", d,
                                        product, space.tiled_dims[d].extent));
    }
  }
  if (s.compute_at_index < 0 || s.compute_at_index >= static_cast<int>(space.compute_at.size())) {
    throw ValidationError("compute_at_index out of range");
  }
  if (s.parallel_fuse_count < 0 || s.parallel_fuse_count > space.max_parallel_fuse) {
    throw ValidationError("parallel_fuse_count out of range");
  }
  if (s.unroll_index < 0 || s.unroll_index >= static_cast<int>(space.unroll_depths.size())) {
    throw ValidationError("unroll_index out of range");
  }
}

std::string_view to_string(Subspace s) {
  switch (s) {
    case kTiling: return "tiling";
    case kComputeAt: return "compute_at";
    case kParallel: return "parallel";
    case kUnroll: return "unroll";
  }
  return "?";
}

ModificationAction ActionSpace::decode(const std::array<int, kNumSubspaces>& index) const {
  ModificationAction a;
  if (index[kTiling] > 0) {
    const int k = index[kTiling] - 1;
    a.tiling = TileMove{k / num_iters, k % num_iters};
  }
  a.compute_at = index[kComputeAt] - 1;
  a.parallel = index[kParallel] - 1;
  a.unroll = index[kUnroll] - 1;
  return a;
}

std::array<int, kNumSubspaces> ActionSpace::encode(const ModificationAction& a) const {
  return {a.tiling ? 1 + a.tiling->from * num_iters + a.tiling->to : 0, a.compute_at + 1,
          a.parallel + 1, a.unroll + 1};
}

bool ActionMask::allows(const ActionSpace& space, const ModificationAction& a) const {
  const auto idx = space.encode(a);
  for (int h = 0; h < kNumSubspaces; ++h) {
    if (idx[h] < 0 || idx[h] >= static_cast<int>(valid[h].size()) || !valid[h][idx[h]]) return false;
  }
  return true;
}

namespace {

std::vector<bool> delta_mask(int index, int count) {
  return {index > 0, true, index + 1 < count};
}

}  // namespace

ActionMask action_mask(const ScheduleState& s, const Sketch& sketch, const ActionSpace& space) {
  ActionMask mask;
  const int n = space.num_iters;
  const int levels = sketch.space.levels;
  const int loops = sketch.space.num_tiled_loops();
  auto& tiling = mask.valid[kTiling];
  tiling.assign(space.size(kTiling), false);
  tiling[0] = true;
  for (int i = 0; i < std::min(n, loops); ++i) {
    if (s.tiles[i / levels][i % levels] <= 1) continue;
    for (int j = 0; j < std::min(n, loops); ++j) {
      if (i != j && i / levels == j / levels) tiling[1 + i * n + j] = true;
    }
  }
  mask.valid[kComputeAt] =
      delta_mask(s.compute_at_index, static_cast<int>(sketch.space.compute_at.size()));
  mask.valid[kParallel] = delta_mask(s.parallel_fuse_count, sketch.space.max_parallel_fuse + 1);
  mask.valid[kUnroll] =
      delta_mask(s.unroll_index, static_cast<int>(sketch.space.unroll_depths.size()));
  return mask;
}

std::int64_t smallest_prime_factor(std::int64_t n) {
  if (n < 2) return n;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    if (n % p == 0) return p;
  }
  return n;
}

ScheduleState apply_action(const ScheduleState& s, const ModificationAction& a,
                           const Sketch& sketch) {
  const auto& space = sketch.space;
  const int levels = space.levels;
  const int loops = space.num_tiled_loops();
  ScheduleState next = s;
  auto reject = [](Subspace sub, const std::string& why) {
    throw InvalidActionError(fmt::format("invalid {} action: {}", to_string(sub), why));
  };
  if (a.tiling) {
    const auto [from, to] = *a.tiling;
    if (from == to || from < 0 || to < 0 || from >= loops || to >= loops) {
      reject(kTiling, fmt::format("Move({}, {}) is out of range", from, to));
    }
    if (from / levels != to / levels) {
      reject(kTiling, fmt::format("Move({}, {}) crosses dimensions", from, to));
    }
    auto& factors = next.tiles[from / levels];
    auto& src = factors[from % levels];
    if (src <= 1) reject(kTiling, fmt::format("loop {} has no factor > 1", from));
    const auto p = smallest_prime_factor(src);
    src /= p;
    factors[to % levels] *= p;
  }
  auto shift = [&](int& value, int delta, int count, Subspace sub) {
    if (delta < -1 || delta > 1) reject(sub, fmt::format("delta {} not in {{-1, 0, 1}}", delta));
    if (value + delta < 0 || value + delta >= count) {
      reject(sub, fmt::format("index {} shifted by {} leaves [0, {})", value, delta, count));
    }
    value += delta;
  };
  shift(next.compute_at_index, a.compute_at, static_cast<int>(space.compute_at.size()), kComputeAt);
  shift(next.parallel_fuse_count, a.parallel, space.max_parallel_fuse + 1, kParallel);
  shift(next.unroll_index, a.unroll, static_cast<int>(space.unroll_depths.size()), kUnroll);
  return next;
}

std::uint64_t enumerate_tilings(std::int64_t extent, int levels) {
  if (extent < 1 || levels < 1) {
    throw ValidationError("enumerate_tilings requires extent >= 1 and levels >= 1");
  }
  unsigned __int128 total = 1;
  const auto limit = static_cast<unsigned __int128>(UINT64_MAX);
  for (const auto& [p, e] : factorize(extent)) {
    // C(e + levels - 1, levels - 1) ordered placements of e equal prime factors.
    unsigned __int128 c = 1;
    const int k = std::min(e, levels - 1);
    for (int i = 1; i <= k; ++i) {
      c = c * static_cast<unsigned>(e + levels - k - 1 + i) / static_cast<unsigned>(i);
      if (c > limit) throw OverflowError("tiling count exceeds 64 bits");
    }
    total *= c;
    if (total > limit) throw OverflowError("tiling count exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(total);
}

std::vector<std::vector<std::int64_t>> all_tilings(std::int64_t extent, int levels) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> cur;
  std::function<void(std::int64_t, int)> rec = [&](std::int64_t rest, int left) {
    if (left == 1) {
      cur.push_back(rest);
      out.push_back(cur);
      cur.pop_back();
      return;
    }
    for (std::int64_t f = 1; f <= rest; ++f) {
      if (rest % f != 0) continue;
      cur.push_back(f);
      rec(rest / f, left - 1);
      cur.pop_back();
    }
  };
  rec(extent, levels);
  return out;
}

BigInt space_size(const Sketch& sketch) {
  const auto& space = sketch.space;
  BigInt total = 1;
  for (const auto& d : space.tiled_dims) total *= enumerate_tilings(d.extent, space.levels);
  total *= space.unroll_depths.size();
  total *= space.max_parallel_fuse + 1;
  total *= space.compute_at.size();
  return total;
}

void enumerate_space(const Sketch& sketch, const std::function<void(const ScheduleState&)>& visit) {
  const auto& space = sketch.space;
  std::vector<std::vector<std::vector<std::int64_t>>> per_dim;
  for (const auto& d : space.tiled_dims) per_dim.push_back(all_tilings(d.extent, space.levels));
  ScheduleState s;
  s.sketch_id = sketch.id;
  s.tiles.resize(per_dim.size());
  std::function<void(std::size_t)> rec = [&](std::size_t d) {
    if (d == per_dim.size()) {
      for (int ca = 0; ca < static_cast<int>(space.compute_at.size()); ++ca) {
        for (int par = 0; par <= space.max_parallel_fuse; ++par) {
          for (int ur = 0; ur < static_cast<int>(space.unroll_depths.size()); ++ur) {
            s.compute_at_index = ca;
            s.parallel_fuse_count = par;
            s.unroll_index = ur;
            visit(s);
          }
        }
      }
      return;
    }
    for (const auto& t : per_dim[d]) {
      s.tiles[d] = t;
      rec(d + 1);
    }
  };
  rec(0);
}

namespace {

// Uniform ordered composition of `extent` into `levels` factors: each prime's
// exponent is spread over the levels by a uniform stars-and-bars draw.
std::vector<std::int64_t> sample_tiling(std::int64_t extent, int levels, Rng& rng) {
  std::vector<std::int64_t> factors(levels, 1);
  for (const auto& [p, e] : factorize(extent)) {
    const int slots = e + levels - 1;
    int needed = levels - 1;
    int level = 0;
    for (int idx = 0; idx < slots; ++idx) {
      std::uniform_int_distribution<int> pick(0, slots - idx - 1);
      if (needed > 0 && pick(rng) < needed) {
        --needed;
        ++level;  // bar
      } else {
        factors[level] *= p;  // star
      }
    }
  }
  return factors;
}

}  // namespace

std::vector<ScheduleState> sample_initial_schedules(const Sketch& sketch, int count, Rng& rng) {
  if (count < 1) throw ValidationError("initial schedule count must be >= 1");
  const auto& space = sketch.space;
  std::vector<ScheduleState> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    ScheduleState s;
    s.sketch_id = sketch.id;
    for (const auto& d : space.tiled_dims) s.tiles.push_back(sample_tiling(d.extent, space.levels, rng));
    s.compute_at_index = std::uniform_int_distribution<int>(
        0, static_cast<int>(space.compute_at.size()) - 1)(rng);
    s.parallel_fuse_count = std::uniform_int_distribution<int>(0, space.max_parallel_fuse)(rng);
    s.unroll_index = std::uniform_int_distribution<int>(
        0, static_cast<int>(space.unroll_depths.size()) - 1)(rng);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::int64_t loop_tile(const ScheduleState& s, const Stage& stage, const SubgraphSpec& sg, int loop,
                       int depth) {
  (void)sg;
  const int d = stage.dim_of_loop[loop];
  if (d < 0) return stage.loop_extents[loop];
  const auto& factors = s.tiles[d];
  std::int64_t tile = 1;
  const int levels = static_cast<int>(factors.size());
  for (int l = std::max(0, levels - depth); l < levels; ++l) tile *= factors[l];
  return tile;
}

namespace {

double tensor_size(const ScheduleState& s, const Stage& stage, const SubgraphSpec& sg,
                   const TensorAccess& t, int depth) {
  double size = 1.0;
  for (const auto& axis : t.axes) {
    const auto a = loop_tile(s, stage, sg, axis.loop, depth);
    if (axis.window_loop >= 0) {
      const auto w = loop_tile(s, stage, sg, axis.window_loop, depth);
      size *= static_cast<double>((a - 1) * axis.stride + w);
    } else {
      size *= static_cast<double>(a);
    }
  }
  return size;
}

}  // namespace

StageFootprint stage_footprint(const ScheduleState& s, const Sketch& sketch, const SubgraphSpec& sg,
                               const Stage& stage) {
  const auto& ca = sketch.space.compute_at[s.compute_at_index];
  const bool attached = !ca.is_root() && ca.stage_id == stage.anchor;
  StageFootprint fp;
  for (const auto& t : stage.tensors) {
    const double inner = tensor_size(s, stage, sg, t, 1);
    const double outer = tensor_size(s, stage, sg, t, 2);
    if (!t.is_output) {
      fp.l1 += inner;
      fp.l2 += outer;
      continue;
    }
    switch (stage.structure) {
      case NodeStructure::TiledFusedWithConsumer:
        // Intermediate plus the consumer's output of the same shape.
        fp.l1 += 2.0 * inner;
        fp.l2 += (attached ? 1.0 : 2.0) * outer;
        break;
      case NodeStructure::CacheWriteThenTiled:
        // The write cache accumulates in registers; it spills to L2 unless attached.
        fp.l2 += (attached ? 1.0 : 2.0) * outer;
        break;
      default:
        fp.l1 += inner;
        fp.l2 += outer;
        break;
    }
  }
  return fp;
}

double parallel_extent(const ScheduleState& s, const Stage& stage, const SubgraphSpec& sg, int count) {
  (void)sg;
  double e = 1.0;
  const int n = std::min(count, static_cast<int>(stage.parallel_loops.size()));
  for (int i = 0; i < n; ++i) {
    const auto [loop, level] = stage.parallel_loops[i];
    const int d = stage.dim_of_loop[loop];
    if (level < 0 || d < 0) {
      e *= static_cast<double>(stage.loop_extents[loop]);
    } else {
      e *= static_cast<double>(s.tiles[d][level]);
    }
  }
  return e;
}

}  // namespace hiertune
