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
#include <cstdint>
#include <vector>

#include "hiertune/schedule.hpp"

namespace hiertune {

struct StoppingConfig {
  /// Steps between culls; 0 disables culling (fixed-length tracks).
  int lambda = 20;
  double rho = 0.5;
  int min_tracks = 64;

  void validate() const;
};

/// True when a cull is due after `step` episode steps.
bool should_cull(int step, int lambda);

struct Track {
  std::vector<ScheduleState> states;
  std::vector<double> scores;
  bool alive = true;
  int steps = 0;

  const ScheduleState& current() const { return states.back(); }
};

struct CullEvent {
  int step = 0;
  std::vector<int> eliminated;
  /// Highest advantage among the eliminated tracks.
  double cut = 0.0;
};

/// Schedule tracks of one episode with a hard budget on modification steps.
class TrackSet {
 public:
  TrackSet(const std::vector<ScheduleState>& initial, const std::vector<double>& initial_scores,
           StoppingConfig cfg, std::int64_t budget);

  const std::vector<Track>& tracks() const { return tracks_; }
  const StoppingConfig& config() const { return cfg_; }
  int alive_count() const;
  std::vector<int> alive() const;
  /// Alive tracks that take the next step: all of them, or the first ones that
  /// still fit into the remaining budget.
  std::vector<int> stepping() const;

  void advance(int track, ScheduleState next, double score);
  /// Ends one step of the episode (after all stepping tracks advanced).
  void end_step() { ++step_; }
  int step() const { return step_; }

  /// Eliminates min(floor(rho * alive), alive - min_tracks) of the alive tracks
  /// with the lowest advantages, ties eliminating the higher index.
  /// `advantages` has one entry per alive track, in alive() order.
  CullEvent cull(const std::vector<double>& advantages);

  bool done() const;
  std::int64_t budget() const { return budget_; }
  std::int64_t used() const { return used_; }

 private:
  StoppingConfig cfg_;
  std::vector<Track> tracks_;
  std::int64_t budget_;
  std::int64_t used_ = 0;
  int step_ = 0;
};

/// Step-independent "episode over" test.
inline bool episode_done(const TrackSet& ts) { return ts.done(); }

struct CriticalStepStats {
  std::array<std::int64_t, 10> histogram{};
  /// (index of the best score + 1) / length per history, earliest index on ties.
  std::vector<double> positions;
};

CriticalStepStats critical_step_stats(const std::vector<std::vector<double>>& histories);

}  // namespace hiertune
