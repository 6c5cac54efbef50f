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

#include "hiertune/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiertune/error.hpp"

namespace hiertune {

void StoppingConfig::validate() const {
  if (lambda < 0) throw ValidationError("lambda must be >= 1 (or 0 to disable culling)");
  if (!(rho >= 0 && rho < 1)) throw ValidationError("rho must lie in [0, 1)");
  if (min_tracks < 1) throw ValidationError("minimum track count must be >= 1");
}

bool should_cull(int step, int lambda) { return lambda > 0 && step >= 1 && step % lambda == 0; }

TrackSet::TrackSet(const std::vector<ScheduleState>& initial, const std::vector<double>& initial_scores,
                   StoppingConfig cfg, std::int64_t budget)
    : cfg_(cfg), budget_(budget) {
  cfg_.validate();
  if (initial.size() != initial_scores.size()) throw ValidationError("one score per initial track is required");
  for (std::size_t i = 0; i < initial.size(); ++i) {
    Track t;
    t.states.push_back(initial[i]);
    t.scores.push_back(initial_scores[i]);
    tracks_.push_back(std::move(t));
  }
}

int TrackSet::alive_count() const {
  return static_cast<int>(std::count_if(tracks_.begin(), tracks_.end(), [](const Track& t) { return t.alive; }));
}

std::vector<int> TrackSet::alive() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(tracks_.size()); ++i) {
    if (tracks_[i].alive) out.push_back(i);
  }
  return out;
}

std::vector<int> TrackSet::stepping() const {
  auto out = alive();
  const auto remaining = std::max<std::int64_t>(0, budget_ - used_);
  if (static_cast<std::int64_t>(out.size()) > remaining) out.resize(remaining);
  return out;
}

void TrackSet::advance(int track, ScheduleState next, double score) {
  auto& t = tracks_.at(track);
  if (!t.alive) throw ValidationError("an eliminated track cannot step");
  if (used_ >= budget_) throw ValidationError("episode budget exhausted");
  t.states.push_back(std::move(next));
  t.scores.push_back(score);
  ++t.steps;
  ++used_;
}

CullEvent TrackSet::cull(const std::vector<double>& advantages) {
  auto live = alive();
  if (advantages.size() != live.size()) throw ValidationError("one advantage per alive track is required");
  CullEvent ev;
  ev.step = step_;
  const int n = static_cast<int>(live.size());
  const int count = std::min(static_cast<int>(std::floor(cfg_.rho * n)), std::max(0, n - cfg_.min_tracks));
  if (count <= 0) return ev;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Lowest advantage first; among equals the higher track index goes first.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (advantages[a] != advantages[b]) return advantages[a] < advantages[b];
    return live[a] > live[b];
  });
  ev.cut = advantages[order[count - 1]];
  for (int k = 0; k < count; ++k) {
    tracks_[live[order[k]]].alive = false;
    ev.eliminated.push_back(live[order[k]]);
  }
  std::sort(ev.eliminated.begin(), ev.eliminated.end());
  return ev;
}

bool TrackSet::done() const { return alive_count() < cfg_.min_tracks || used_ >= budget_; }

CriticalStepStats critical_step_stats(const std::vector<std::vector<double>>& histories) {
  CriticalStepStats out;
  for (const auto& h : histories) {
    if (h.empty()) throw ValidationError("critical-step analysis needs non-empty histories");
    const auto best = std::max_element(h.begin(), h.end()) - h.begin();
    const auto len = static_cast<std::int64_t>(h.size());
    out.positions.push_back(static_cast<double>(best + 1) / static_cast<double>(len));
    const auto bin = (10 * (best + 1) + len - 1) / len - 1;
    ++out.histogram[bin];
  }
  return out;
}

}  // namespace hiertune
