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

#include <fmt/format.h>

#include "hiertune/binary_io.hpp"
#include "hiertune/error.hpp"
#include "hiertune/tuner.hpp"

namespace hiertune {

namespace {

constexpr std::string_view kMagic = "hiertune-checkpoint";
constexpr std::uint64_t kVersion = 1;

void save_window(BinaryWriter& out, const SlidingWindowStats& w) {
  out.i64(w.num_arms());
  out.i64(w.tau());
  out.i64(w.t());
  out.u64(w.entries().size());
  for (const auto& e : w.entries()) {
    out.i64(e.step);
    out.i64(e.arm);
    out.f64(e.value);
  }
}

void load_window(BinaryReader& in, SlidingWindowStats& w) {
  const auto arms = static_cast<int>(in.i64());
  const auto tau = static_cast<int>(in.i64());
  const auto t = in.i64();
  const auto n = in.u64();
  if (n > in.remaining()) throw CheckpointError("corrupt bandit window");
  std::deque<SlidingWindowStats::Entry> entries;
  for (std::uint64_t i = 0; i < n; ++i) {
    SlidingWindowStats::Entry e;
    e.step = in.i64();
    e.arm = static_cast<int>(in.i64());
    e.value = in.f64();
    entries.push_back(e);
  }
  w.restore(arms, tau, t, std::move(entries));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void check_header(BinaryReader& in) {
  std::string magic;
  try {
    magic = in.str();
  } catch (const CheckpointError&) {
    throw CheckpointError("not a checkpoint file");
  }
  if (magic != kMagic) throw CheckpointError("not a checkpoint file");
  const auto version = in.u64();
  if (version != kVersion) {
    throw CheckpointError(fmt::format("checkpoint version {} is not supported (expected {})", version, kVersion));
  }
}

}  // namespace

std::string TuningSession::serialize() const {
  BinaryWriter out;
  out.str(kMagic);
  out.u64(kVersion);
  out.str(metadata);
  out.str(cfg_.to_json().dump());
  out.str(to_json(net_).dump());
  std::ostringstream rng;
  rng << rng_;
  out.str(rng.str());
  out.i64(round_);
  out.i64(consumed_);
  save_window(out, subgraph_window_);
  out.u64(stats_.history.size());
  for (std::size_t n = 0; n < stats_.history.size(); ++n) {
    out.i64(stats_.trials[n]);
    out.f64(stats_.best_throughput[n]);
    out.u64(stats_.history[n].size());
    for (const auto& [t, g] : stats_.history[n]) {
      out.i64(t);
      out.f64(g);
    }
  }
  for (const auto& rt : runtime_) {
    save_window(out, rt.sketch_window);
    out.u64(rt.measured.size());
    for (const auto& key : rt.measured) out.str(key);
    out.u8(rt.best_state ? 1 : 0);
    if (rt.best_state) out.str(rt.best_state->canonical());
    out.f64(rt.best_time);
    out.u8(rt.exhausted ? 1 : 0);
    out.u8(rt.agent ? 1 : 0);
    if (rt.agent) rt.agent->save(out);
  }
  model_.save(out);
  out.str(backend_->save_state());
  out.u64(curve_.size());
  for (const auto& p : curve_) {
    out.i64(p.trials);
    out.f64(p.f_estimate);
  }
  out.u64(log_.size());
  for (const auto& line : log_) out.str(line);
  return out.data();
}

std::unique_ptr<TuningSession> TuningSession::deserialize(std::string_view bytes,
                                                          std::shared_ptr<MeasureBackend> backend) {
  BinaryReader in(bytes);
  check_header(in);
  auto meta = in.str();
  TunerConfig cfg;
  NetworkSpec net;
  try {
    cfg = TunerConfig::from_json(nlohmann::ordered_json::parse(in.str()));
    net = parse_network(nlohmann::ordered_json::parse(in.str()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(fmt::format("corrupt checkpoint configuration: {}", e.what()));
  }
  auto s = std::make_unique<TuningSession>(std::move(net), std::move(cfg), std::move(backend));
  s->metadata = std::move(meta);
  std::istringstream rng(in.str());
  rng >> s->rng_;
  if (!rng) throw CheckpointError("corrupt generator state");
  s->round_ = static_cast<int>(in.i64());
  s->consumed_ = in.i64();
  load_window(in, s->subgraph_window_);
  const auto n = in.u64();
  if (n != s->runtime_.size()) throw CheckpointError("checkpoint subgraph count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    s->stats_.trials[i] = in.i64();
    s->stats_.best_throughput[i] = in.f64();
    const auto points = in.u64();
    if (points > in.remaining()) throw CheckpointError("corrupt latency history");
    s->stats_.history[i].clear();
    for (std::uint64_t p = 0; p < points; ++p) {
      const auto t = in.i64();
      s->stats_.history[i].emplace_back(t, in.f64());
    }
  }
  for (auto& rt : s->runtime_) {
    load_window(in, rt.sketch_window);
    const auto count = in.u64();
    if (count > in.remaining()) throw CheckpointError("corrupt measured set");
    rt.measured.clear();
    for (std::uint64_t i = 0; i < count; ++i) rt.measured.insert(in.str());
    rt.best_state.reset();
    if (in.u8()) rt.best_state = ScheduleState::parse(in.str());
    rt.best_time = in.f64();
    rt.exhausted = in.u8() != 0;
    const bool has_agent = in.u8() != 0;
    if (has_agent != rt.agent.has_value()) throw CheckpointError("checkpoint agent layout mismatch");
    if (has_agent) rt.agent->load(in);
  }
  s->model_.load(in);
  s->backend_->load_state(in.str());
  const auto points = in.u64();
  if (points > in.remaining()) throw CheckpointError("corrupt curve");
  s->curve_.clear();
  for (std::uint64_t i = 0; i < points; ++i) {
    const auto t = in.i64();
    s->curve_.push_back({t, in.f64()});
  }
  const auto lines = in.u64();
  if (lines > in.remaining()) throw CheckpointError("corrupt log");
  s->log_.clear();
  for (std::uint64_t i = 0; i < lines; ++i) s->log_.push_back(in.str());
  if (!in.done()) throw CheckpointError("trailing bytes in checkpoint");
  return s;
}

void TuningSession::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(fmt::format("cannot write checkpoint '{}'", tmp.string()));
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError(fmt::format("cannot write checkpoint '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<TuningSession> TuningSession::resume(const std::filesystem::path& path,
                                                     std::shared_ptr<MeasureBackend> backend) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError(fmt::format("checkpoint '{}' does not exist", path.string()));
  }
  return deserialize(read_file(path), std::move(backend));
}

std::string TuningSession::read_metadata(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError(fmt::format("checkpoint '{}' does not exist", path.string()));
  }
  const auto bytes = read_file(path);
  BinaryReader in(bytes);
  check_header(in);
  return in.str();
}

}  // namespace hiertune
