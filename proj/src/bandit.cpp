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

#include "hiertune/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

void BanditConfig::validate() const {
  if (!(c >= 0)) throw ValidationError("bandit c must be >= 0");
  if (tau < 1) throw ValidationError("bandit tau must be >= 1");
  if (!(alpha >= 0 && alpha <= 1)) throw ValidationError("bandit alpha must lie in [0, 1]");
  if (!(beta > 0)) throw ValidationError("bandit beta must be > 0");
  if (delta_t < 0) throw ValidationError("bandit delta_t must be >= 1 (or 0 for one round)");
}

SlidingWindowStats::SlidingWindowStats(int num_arms, int tau) : tau_(tau), counts_(num_arms, 0) {
  if (tau < 1) throw ValidationError("window size must be >= 1");
}

void SlidingWindowStats::record(int arm, double value) { record(arm, value, t_ + 1); }

void SlidingWindowStats::record(int arm, double value, std::int64_t step) {
  if (arm < 0 || arm >= num_arms()) throw ValidationError(fmt::format("unknown arm {}", arm));
  if (step <= t_) {
    throw ValidationError(fmt::format("bandit step {} does not follow step {}", step, t_));
  }
  t_ = step;
  entries_.push_back({step, arm, value});
  ++counts_[arm];
  while (!entries_.empty() && entries_.front().step < step - tau_ + 1) {
    --counts_[entries_.front().arm];
    entries_.pop_front();
  }
}

std::optional<double> SlidingWindowStats::mean(int arm) const {
  if (counts_.at(arm) == 0) return std::nullopt;
  double sum = 0.0;
  for (const auto& e : entries_) {
    if (e.arm == arm) sum += e.value;
  }
  return sum / counts_[arm];
}

void SlidingWindowStats::restore(int num_arms, int tau, std::int64_t t, std::deque<Entry> entries) {
  tau_ = tau;
  t_ = t;
  entries_ = std::move(entries);
  counts_.assign(num_arms, 0);
  for (const auto& e : entries_) {
    if (e.arm < 0 || e.arm >= num_arms) throw CheckpointError("bandit entry with unknown arm");
    ++counts_[e.arm];
  }
}

std::vector<std::optional<double>> window_q(const SlidingWindowStats& stats) {
  std::vector<std::optional<double>> q(stats.num_arms());
  for (int a = 0; a < stats.num_arms(); ++a) q[a] = stats.mean(a);
  return q;
}

std::vector<double> swucb_scores(const SlidingWindowStats& stats, const std::vector<std::optional<double>>& q,
                                 const BanditConfig& cfg) {
  const auto horizon = static_cast<double>(std::min<std::int64_t>(std::max<std::int64_t>(stats.t(), 1), cfg.tau));
  const double log_t = std::log(horizon);
  std::vector<double> scores(stats.num_arms());
  for (int a = 0; a < stats.num_arms(); ++a) {
    const int n = stats.count(a);
    if (n == 0 || !q.at(a)) {
      scores[a] = std::numeric_limits<double>::infinity();
    } else {
      scores[a] = *q[a] + cfg.c * std::sqrt(log_t / n);
    }
  }
  return scores;
}

int swucb_select(const SlidingWindowStats& stats, const std::vector<std::optional<double>>& q,
                 const BanditConfig& cfg) {
  if (stats.num_arms() == 0) throw ValidationError("bandit has no arms");
  const auto scores = swucb_scores(stats, q, cfg);
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::optional<double> SubgraphStats::latency_at(int a, std::int64_t at_trials) const {
  std::optional<double> best;
  for (const auto& [t, g] : history.at(a)) {
    if (t > at_trials) break;
    if (std::isfinite(g)) best = best ? std::min(*best, g) : g;
  }
  return best;
}

std::optional<double> SubgraphStats::best_latency(int a) const {
  return latency_at(a, std::numeric_limits<std::int64_t>::max());
}

void SubgraphStats::record_round(int a, std::int64_t round_trials, std::optional<double> round_best,
                                 double flops) {
  trials.at(a) += round_trials;
  double best = std::numeric_limits<double>::infinity();
  if (auto prev = best_latency(a)) best = *prev;
  if (round_best) best = std::min(best, *round_best);
  history[a].emplace_back(trials[a], best);
  if (std::isfinite(best)) best_throughput[a] = flops / best;
}

double subgraph_reward(const SubgraphStats& ss, const NetworkSpec& net, int a, const BanditConfig& cfg,
                       int round_trials) {
  const auto& sg = net.subgraphs.at(a);
  if (sg.weight == 0) return 0.0;
  const auto g = ss.best_latency(a);
  if (!g || ss.trials[a] == 0) return std::numeric_limits<double>::infinity();
  const auto t_a = static_cast<double>(ss.trials[a]);
  const std::int64_t dt = cfg.delta_t > 0 ? cfg.delta_t : std::max(round_trials, 1);
  double history_term = 0.0;
  if (ss.trials[a] - dt >= 0) {
    if (auto prev = ss.latency_at(a, ss.trials[a] - dt)) history_term = (*g - *prev) / static_cast<double>(dt);
  }
  double max_p = 0.0;
  for (int b : similar_subgraphs(net, a)) max_p = std::max(max_p, ss.best_throughput[b]);
  const double similar_term = cfg.beta * sg.flops / max_p - *g;
  const double optimistic = std::min(-*g / t_a, similar_term);
  return std::abs(static_cast<double>(sg.weight) * (cfg.alpha * history_term + (1 - cfg.alpha) * optimistic));
}

}  // namespace hiertune
