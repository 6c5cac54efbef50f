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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hiertune/schedule.hpp"

namespace hiertune {

/// Constants of the analytic hardware model. None of them is calibrated against
/// real hardware; they only have to make every action subspace matter.
struct SimHwParams {
  int cores = 32;
  double cap_l1 = 4096.0;
  double cap_l2 = 131072.0;
  double miss_l1 = 0.3;
  double miss_l2 = 0.6;
  double parallel_overhead = 0.02;
  std::map<int, double> unroll_multiplier{{0, 1.00}, {16, 0.97}, {64, 0.95}, {512, 0.98}, {1024, 1.00}};
  double peak_flops = 1e11;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  double cache_write_overhead = 0.02;
  double rfactor_overhead = 0.05;

  void validate() const;
  /// Applies a JSON object of overrides; unknown keys are rejected.
  void apply(const nlohmann::ordered_json& overrides);
  /// Applies one `key=value` override.
  void apply(std::string_view key, std::string_view value);
  nlohmann::ordered_json to_json() const;
};

/// Noise-free simulated latency in seconds.
double simulate_time(const ScheduleState& s, const SketchContext& ctx, const SimHwParams& p);

struct MeasureRequest {
  const SketchContext* ctx = nullptr;
  ScheduleState state;
  std::string workload_id;
};

struct MeasureResult {
  double time_seconds = 0.0;
  double throughput = 0.0;
  bool valid = false;
  std::string error;
  int repeats = 0;
};

class MeasureBackend {
 public:
  virtual ~MeasureBackend() = default;
  virtual std::vector<MeasureResult> measure_batch(std::span<const MeasureRequest> requests) = 0;
  /// Opaque backend state for checkpoints (noise generators and the like).
  virtual std::string save_state() const { return {}; }
  virtual void load_state(std::string_view) {}
};

class SimulatedBackend final : public MeasureBackend {
 public:
  explicit SimulatedBackend(SimHwParams params);

  std::vector<MeasureResult> measure_batch(std::span<const MeasureRequest> requests) override;
  std::string save_state() const override;
  void load_state(std::string_view state) override;

  const SimHwParams& params() const { return params_; }

 private:
  SimHwParams params_;
  Rng noise_rng_;
};

/// Runs one child process per candidate (`/bin/sh -c command`). Each request is
/// one JSON line on the child's stdin, answered by one JSON line
/// `{"time_seconds": x}` or `{"error": "..."}`. Requests repeat until the
/// reported times add up to `min_repeat_seconds`; the mean is reported.
class ExternalCommandBackend final : public MeasureBackend {
 public:
  struct Options {
    std::string command;
    double min_repeat_seconds = 1.0;
    double timeout_seconds = 60.0;
    int max_repeats = 10000;
  };

  explicit ExternalCommandBackend(Options options);

  std::vector<MeasureResult> measure_batch(std::span<const MeasureRequest> requests) override;

 private:
  MeasureResult measure_one(const MeasureRequest& request) const;

  Options options_;
};

/// Canonical request line of the external protocol.
std::string external_request_line(const MeasureRequest& request);

struct BruteForceResult {
  ScheduleState best;
  double best_time = 0.0;
  ScheduleState worst;
  double worst_time = 0.0;
  std::uint64_t states = 0;
};

/// Exhaustive noise-free search of one sketch. Ties go to the smaller canonical
/// form. Throws ValidationError reporting the size when it exceeds `cap`.
BruteForceResult brute_force_best(const SketchContext& ctx, const SimHwParams& p,
                                  const BigInt& cap = BigInt(1'000'000));

}  // namespace hiertune
