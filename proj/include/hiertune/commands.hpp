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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hiertune/report.hpp"
#include "hiertune/tuner.hpp"

namespace hiertune {

struct RunConfig {
  std::filesystem::path workload;
  /// Network to pick from the workload file; empty when it holds exactly one.
  std::string network;
  TunerConfig tuner;
  /// "sim" or "external".
  std::string backend = "sim";
  std::string command;
  double min_repeat_seconds = 1.0;
  double timeout_seconds = 60.0;
  /// Simulator overrides applied after the workload's own "sim" block.
  std::vector<std::pair<std::string, std::string>> sim;
  std::filesystem::path out;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::ordered_json& j);
};

/// $HIERTUNE_OUT_DIR, or ./hiertune-out.
std::filesystem::path default_out_root();

SimHwParams resolve_sim(const RunConfig& cfg, const NetworkSpec& net);
std::shared_ptr<MeasureBackend> make_backend(const RunConfig& cfg, const NetworkSpec& net);

struct TuneOutcome {
  TuneReport report;
  double wall_seconds = 0.0;
  std::filesystem::path out;
};

/// Runs (or resumes from `out/checkpoint.bin`) one session. Writes
/// trajectory.jsonl and checkpoint.bin every round, summary.json and
/// allocation.csv at the end.
TuneOutcome cmd_tune(const RunConfig& cfg, bool resume = false);

struct CompareRun {
  SearcherKind searcher = SearcherKind::Hierarchical;
  std::uint64_t seed = 0;
  TuneReport report;
  double wall_seconds = 0.0;
  std::filesystem::path trajectory;
  /// Trials until this run matched the first searcher's final estimate on the same seed.
  std::optional<std::int64_t> trials_to_match;
  double normalized_performance = 0.0;
};

/// Runs every searcher on every seed with the same workload and budget.
/// Writes compare_curves.csv and compare_summary.csv.
std::vector<CompareRun> cmd_compare(const RunConfig& base, const std::vector<SearcherKind>& searchers,
                                    const std::vector<std::uint64_t>& seeds);

struct SweepRow {
  std::string value;
  double mean_best_f = 0.0;
  double normalized_performance = 0.0;
  double mean_round_seconds = 0.0;
  double normalized_round_time = 0.0;
};

/// One run per value (and seed) of `param` (lambda or rho). Writes sweep.csv.
std::vector<SweepRow> cmd_sweep(const RunConfig& base, const std::string& param,
                                const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds);

struct ReportOutcome {
  std::vector<TrajectoryReplay> replays;
  int skipped_lines = 0;
};

/// Critical-step histograms, allocation tables and improvement distributions
/// of the given trajectory logs, side by side.
ReportOutcome cmd_report(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& out);

}  // namespace hiertune
