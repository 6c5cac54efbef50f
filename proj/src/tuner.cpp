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

#include <cmath>

#include "hiertune/tuner.hpp"

namespace hiertune {

TuneReport tune_network(TuningSession& session, const std::function<void(const TuningSession&)>& after_round) {
  while (!session.finished()) {
    session.run_round();
    if (after_round) after_round(session);
  }
  return session.report();
}

std::vector<AllocationRow> allocation_report(const TuningSession& session,
                                             const std::vector<std::optional<double>>& reference) {
  const auto& net = session.network();
  const auto& stats = session.stats();
  std::vector<AllocationRow> rows;
  double total = 0.0;
  for (std::size_t n = 0; n < net.subgraphs.size(); ++n) {
    AllocationRow row;
    row.subgraph = net.subgraphs[n].id;
    row.weight = net.subgraphs[n].weight;
    row.trials = stats.trials[n];
    row.best_time = session.runtime(static_cast<int>(n)).best_time;
    if (n < reference.size() && reference[n]) {
      for (const auto& [t, g] : stats.history[n]) {
        if (g <= *reference[n]) {
          row.trials_to_reference = t;
          break;
        }
      }
    }
    if (std::isfinite(row.best_time)) total += static_cast<double>(row.weight) * row.best_time;
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    row.contribution_pct =
        total > 0 && std::isfinite(row.best_time) ? 100.0 * static_cast<double>(row.weight) * row.best_time / total : 0.0;
  }
  return rows;
}

}  // namespace hiertune
