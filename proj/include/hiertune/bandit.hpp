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
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "hiertune/workload.hpp"

namespace hiertune {

struct BanditConfig {
  double c = 0.25;
  int tau = 256;
  double alpha = 0.2;
  double beta = 2.0;
  /// Backward window of the gradient estimate in allocated trials;
  /// 0 means one measurement round.
  int delta_t = 0;

  void validate() const;
};

/// Arm pulls and their values over the last `tau` steps.
class SlidingWindowStats {
 public:
  struct Entry {
    std::int64_t step = 0;
    int arm = 0;
    double value = 0.0;
    bool operator==(const Entry&) const = default;
  };

  SlidingWindowStats() = default;
  SlidingWindowStats(int num_arms, int tau);

  /// Records at step t() + 1.
  void record(int arm, double value);
  /// Records at an explicit step; throws ValidationError unless step > t().
  void record(int arm, double value, std::int64_t step);

  std::int64_t t() const { return t_; }
  int tau() const { return tau_; }
  int num_arms() const { return static_cast<int>(counts_.size()); }
  int count(int arm) const { return counts_.at(arm); }
  /// Window mean of the arm's values; nullopt when the arm has no entry in the window.
  std::optional<double> mean(int arm) const;
  const std::deque<Entry>& entries() const { return entries_; }

  /// Rebuilds from raw entries (checkpoint restore).
  void restore(int num_arms, int tau, std::int64_t t, std::deque<Entry> entries);

 private:
  int tau_ = 256;
  std::int64_t t_ = 0;
  std::deque<Entry> entries_;
  std::vector<int> counts_;
};

/// Upper confidence bound of every arm; +inf for arms without pulls in the window.
std::vector<double> swucb_scores(const SlidingWindowStats& stats, const std::vector<std::optional<double>>& q,
                                 const BanditConfig& cfg);
/// Arm maximizing the bound, lowest index on ties.
int swucb_select(const SlidingWindowStats& stats, const std::vector<std::optional<double>>& q,
                 const BanditConfig& cfg);

/// Average value recorded for the arm within the window (sketch arms record X_t,
/// subgraph arms record the gradient reward).
inline std::optional<double> sketch_q(const SlidingWindowStats& stats, int arm) { return stats.mean(arm); }
inline std::optional<double> subgraph_q(const SlidingWindowStats& stats, int arm) { return stats.mean(arm); }
std::vector<std::optional<double>> window_q(const SlidingWindowStats& stats);

/// Latency history and throughput of every subgraph of a network.
struct SubgraphStats {
  /// Per subgraph: (allocated trials, best latency so far in seconds) after each round.
  std::vector<std::vector<std::pair<std::int64_t, double>>> history;
  std::vector<std::int64_t> trials;
  /// Best throughput in FLOP/s, 0 until a valid measurement exists.
  std::vector<double> best_throughput;

  explicit SubgraphStats(int n = 0) : history(n), trials(n, 0), best_throughput(n, 0.0) {}

  bool measured(int a) const { return best_throughput.at(a) > 0; }
  /// Best latency reached by `at_trials` allocated trials, if any round ended by then.
  std::optional<double> latency_at(int a, std::int64_t at_trials) const;
  std::optional<double> best_latency(int a) const;
  /// Books one round of `trials` measurements whose best valid latency is `round_best`.
  void record_round(int a, std::int64_t trials, std::optional<double> round_best, double flops);
};

/// Gradient-style reward of allocating more trials to subgraph `a`:
/// |w (alpha (g(t) - g(t - dt)) / dt + (1 - alpha) min(-g/t, beta B / max P - g))|,
/// +inf while the subgraph has no valid measurement.
double subgraph_reward(const SubgraphStats& ss, const NetworkSpec& net, int a, const BanditConfig& cfg,
                       int round_trials);

}  // namespace hiertune
