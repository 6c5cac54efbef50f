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
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hiertune/bandit.hpp"
#include "hiertune/cost_model.hpp"
#include "hiertune/features.hpp"
#include "hiertune/measure.hpp"
#include "hiertune/rl.hpp"
#include "hiertune/stopping.hpp"

namespace hiertune {

enum class SearcherKind {
  /// Bandit over subgraphs, bandit over sketches, actor-critic episodes with adaptive stopping.
  Hierarchical,
  /// As Hierarchical, but the subgraph with the largest gradient reward is always taken.
  HierarchicalNoSubgraphBandit,
  /// As Hierarchical, without culling: every track runs the full length.
  HierarchicalFixedLength,
  /// Greedy subgraph, uniform sketch, uniformly random valid mutations, cost-model top-K.
  Evolutionary,
  /// Uniform subgraph, sketch and unmeasured schedule.
  Random,
};

std::string_view to_string(SearcherKind k);
SearcherKind searcher_from_string(std::string_view name);
bool uses_policy(SearcherKind k);

struct TunerConfig {
  SearcherKind searcher = SearcherKind::Hierarchical;
  std::int64_t trials = 1000;
  /// Measurements per round.
  int k = 64;
  /// Initial tracks per episode.
  int tracks = 128;
  /// Fixed track length; 0 means twice lambda.
  int track_length = 0;
  std::uint64_t seed = 0;
  BanditConfig bandit;
  RlConfig rl;
  StoppingConfig stopping;
  GbtConfig gbt;

  int effective_track_length() const;
  void validate() const;
  /// Applies one `key=value` hyperparameter override.
  void apply(std::string_view key, std::string_view value);
  nlohmann::ordered_json to_json() const;
  static TunerConfig from_json(const nlohmann::ordered_json& j);
};

/// Visited schedules of one episode with their predicted scores.
struct VisitHeap {
  std::vector<ScheduleState> states;
  std::vector<double> scores;
};

struct EpisodeResult {
  VisitHeap heap;
  std::int64_t steps = 0;
  std::int64_t visited = 0;
  std::int64_t budget = 0;
  std::vector<CullEvent> culls;
  std::vector<int> track_lengths;
  CriticalStepStats critical;
  /// Counts of predicted step improvement: < -10%, [-10%, 0), 0, (0, 10%], > 10%.
  std::array<std::int64_t, 5> improvement{};
  std::int64_t transitions = 0;
  std::optional<LossReport> last_loss;
  int trainings = 0;
};

struct RoundResult {
  int round = 0;
  int subgraph = 0;
  int sketch = 0;
  int measured = 0;
  int valid = 0;
  std::optional<double> round_best_time;
  double x_t = 0.0;
  double reward = 0.0;
};

struct CurvePoint {
  std::int64_t trials = 0;
  double f_estimate = 0.0;
};

struct TuneReport {
  std::string network;
  SearcherKind searcher = SearcherKind::Hierarchical;
  std::uint64_t seed = 0;
  std::int64_t trials = 0;
  int rounds = 0;
  double f_estimate = 0.0;
  std::vector<std::int64_t> allocations;
  std::vector<double> best_times;
  std::vector<std::string> best_schedules;
  std::vector<CurvePoint> curve;
};

/// Per-subgraph runtime state derived from the network.
struct SubgraphRuntime {
  std::vector<Sketch> sketches;
  std::vector<SketchContext> contexts;
  ActionSpace space;
  SlidingWindowStats sketch_window;
  std::optional<ActorCritic> agent;
  std::set<std::string> measured;
  std::optional<ScheduleState> best_state;
  double best_time = std::numeric_limits<double>::infinity();
  bool exhausted = false;
};

class TuningSession {
 public:
  TuningSession(NetworkSpec net, TunerConfig cfg, std::shared_ptr<MeasureBackend> backend);
  TuningSession(const TuningSession&) = delete;
  TuningSession& operator=(const TuningSession&) = delete;

  const NetworkSpec& network() const { return net_; }
  const TunerConfig& config() const { return cfg_; }
  int round() const { return round_; }
  std::int64_t consumed() const { return consumed_; }
  bool finished() const;

  /// One pass through the hierarchy: choose subgraph and sketch, search,
  /// measure the top-K, update models and bandits.
  RoundResult run_round();

  /// Parameter search of Algorithm-style episodes for one sketch.
  EpisodeResult run_episode(int subgraph, int sketch);
  /// Measures up to `k` unmeasured schedules from the heap, best predicted first.
  RoundResult measure_round(int subgraph, int sketch, const VisitHeap& heap, int k);

  double f_estimate() const;
  TuneReport report() const;

  const std::vector<std::string>& log_lines() const { return log_; }
  const SubgraphStats& stats() const { return stats_; }
  const SlidingWindowStats& subgraph_window() const { return subgraph_window_; }
  const SubgraphRuntime& runtime(int subgraph) const { return runtime_.at(subgraph); }
  const SurrogateModel& cost_model() const { return model_; }
  const FeatureLayout& layout() const { return layout_; }

  /// Caller-owned blob stored in checkpoints (for example the run configuration).
  std::string metadata;

  /// Round-boundary checkpoint; written atomically.
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static std::unique_ptr<TuningSession> resume(const std::filesystem::path& path,
                                               std::shared_ptr<MeasureBackend> backend);
  static std::unique_ptr<TuningSession> deserialize(std::string_view bytes, std::shared_ptr<MeasureBackend> backend);
  /// Reads only the caller blob of a checkpoint.
  static std::string read_metadata(const std::filesystem::path& path);

 private:
  int choose_subgraph(nlohmann::ordered_json& log);
  int choose_sketch(int subgraph, nlohmann::ordered_json& log);
  VisitHeap random_heap(int subgraph, int sketch, int count);
  int greedy_subgraph() const;
  void emit(nlohmann::ordered_json j);

  NetworkSpec net_;
  TunerConfig cfg_;
  std::shared_ptr<MeasureBackend> backend_;
  FeatureLayout layout_;
  Rng rng_;
  std::vector<SubgraphRuntime> runtime_;
  SlidingWindowStats subgraph_window_;
  SubgraphStats stats_;
  SurrogateModel model_;
  int round_ = 0;
  std::int64_t consumed_ = 0;
  std::vector<CurvePoint> curve_;
  std::vector<std::string> log_;
};

/// Runs rounds until the budget is spent. `after_round` (if set) is called at
/// every round boundary, e.g. to checkpoint and flush the log.
TuneReport tune_network(TuningSession& session, const std::function<void(const TuningSession&)>& after_round = {});

struct AllocationRow {
  std::string subgraph;
  std::int64_t weight = 0;
  std::int64_t trials = 0;
  /// Trials until the subgraph first reached the reference latency, if given and reached.
  std::optional<std::int64_t> trials_to_reference;
  double best_time = 0.0;
  /// Share of w * g in the estimated network latency, in percent.
  double contribution_pct = 0.0;
};

/// Per-subgraph allocation table. `reference` holds optional per-subgraph latencies.
std::vector<AllocationRow> allocation_report(const TuningSession& session,
                                             const std::vector<std::optional<double>>& reference = {});

}  // namespace hiertune
