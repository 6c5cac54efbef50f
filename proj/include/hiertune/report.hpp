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
#include <filesystem>
#include <string>
#include <vector>

#include "hiertune/tuner.hpp"

namespace hiertune {

/// Totals recomputed from a trajectory log.
struct TrajectoryReplay {
  std::string network;
  std::string searcher;
  std::int64_t trial_budget = 0;
  int k = 0;
  std::vector<std::string> subgraphs;
  std::vector<std::int64_t> weights;

  int rounds = 0;
  int episodes = 0;
  std::int64_t total_measured = 0;
  /// Measurements per subgraph summed from the round records.
  std::vector<std::int64_t> allocations;
  /// Allocations as reported by the last round record.
  std::vector<std::int64_t> reported_allocations;
  std::int64_t reported_total = 0;
  int max_round_measured = 0;
  bool rounds_within_k = true;
  bool episodes_within_budget = true;
  std::int64_t max_episode_visited = 0;
  std::vector<double> final_best;
  double final_f = 0.0;
  std::vector<CurvePoint> curve;
  std::array<std::int64_t, 10> critical_histogram{};
  std::array<std::int64_t, 5> improvement{};
  int skipped_lines = 0;
};

TrajectoryReplay replay_trajectory(const std::vector<std::string>& lines);
TrajectoryReplay replay_trajectory(const std::filesystem::path& path);

/// Writes all lines, replacing the file atomically.
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Minimal CSV writer; fields containing separators are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  std::string str() const { return out_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string out_;
};

std::string format_number(double v);

}  // namespace hiertune
